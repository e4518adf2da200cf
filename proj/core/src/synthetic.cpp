#include "apifreq/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string_view>

#include "apifreq/error.hpp"
#include "apifreq/rng.hpp"

namespace apifreq {

namespace {

constexpr std::array<std::string_view, 59> kNtdllNames = {
    "NtAllocateVirtualMemory", "NtClose", "NtCreateFile", "NtCreateKey", "NtCreateMutant",
    "NtCreateProcessEx", "NtCreateSection", "NtCreateThreadEx", "NtCreateUserProcess",
    "NtDelayExecution", "NtDeleteFile", "NtDeleteKey", "NtDeleteValueKey", "NtDeviceIoControlFile",
    "NtDuplicateObject", "NtEnumerateKey", "NtEnumerateValueKey", "NtFreeVirtualMemory",
    "NtGetContextThread", "NtLoadDriver", "NtMapViewOfSection", "NtOpenDirectoryObject",
    "NtOpenFile", "NtOpenKey", "NtOpenKeyEx", "NtOpenMutant", "NtOpenProcess", "NtOpenSection",
    "NtOpenThread", "NtProtectVirtualMemory", "NtQueryAttributesFile", "NtQueryDirectoryFile",
    "NtQueryFullAttributesFile", "NtQueryInformationFile", "NtQueryInformationProcess",
    "NtQueryKey", "NtQuerySystemInformation", "NtQueryValueKey", "NtQueueApcThread",
    "NtReadFile", "NtReadVirtualMemory", "NtResumeThread", "NtSaveKey", "NtSetContextThread",
    "NtSetInformationFile", "NtSetInformationProcess", "NtSetValueKey", "NtShutdownSystem",
    "NtSuspendThread", "NtTerminateProcess", "NtTerminateThread", "NtUnmapViewOfSection",
    "NtWriteFile", "NtWriteVirtualMemory", "LdrGetDllHandle", "LdrGetProcedureAddress",
    "LdrLoadDll", "LdrUnloadDll", "RtlDecompressBuffer"};

// Dirichlet(1) over [begin, end) written into out[begin, end).
void dirichlet_uniform(Rng& rng, std::vector<double>& out, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    out[i] = -std::log(1.0 - rng.uniform01());
    sum += out[i];
  }
  for (std::size_t i = begin; i < end; ++i) out[i] /= sum;
}

std::size_t draw(Rng& rng, const std::vector<double>& cdf) {
  const double u = rng.uniform01() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::string random_sha256(Rng& rng) {
  std::string id;
  for (int k = 0; k < 4; ++k) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng.next()));
    id += buf;
  }
  return id;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (n_samples == 0) fail("n_samples must be positive");
  if (!(benign_fraction >= 0.0 && benign_fraction <= 1.0)) fail("benign_fraction must be in [0, 1]");
  if (alphabet_size < 2) fail("alphabet_size must be at least 2");
  if (min_length == 0 || min_length > max_length) fail("need 1 <= min_length <= max_length");
  if (!(divergence >= 0.0 && divergence <= 1.0)) fail("divergence must be in [0, 1]");
  if (!(ambiguous_fraction >= 0.0 && ambiguous_fraction <= 1.0)) fail("ambiguous_fraction must be in [0, 1]");
}

std::vector<std::string> api_alphabet(std::size_t size) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < size; ++i) {
    if (i < kNtdllNames.size()) {
      names.emplace_back(kNtdllNames[i]);
    } else {
      char buf[48];
      std::snprintf(buf, sizeof buf, "NtSyntheticCall%04zu", i);
      names.emplace_back(buf);
    }
  }
  return names;
}

ClassProfiles class_profiles(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t a = spec.alphabet_size;
  const std::size_t half = a / 2;
  Rng rng(derive_seed(spec.seed, 1));
  std::vector<double> shared(a), benign_part(a, 0.0), malware_part(a, 0.0);
  dirichlet_uniform(rng, shared, 0, a);
  dirichlet_uniform(rng, benign_part, 0, half);
  dirichlet_uniform(rng, malware_part, half, a);

  ClassProfiles p;
  p.names = api_alphabet(a);
  p.malware.resize(a);
  p.benign.resize(a);
  const double d = spec.divergence;
  for (std::size_t i = 0; i < a; ++i) {
    p.malware[i] = (1.0 - d) * shared[i] + d * malware_part[i];
    p.benign[i] = (1.0 - d) * shared[i] + d * benign_part[i];
  }
  return p;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus corpus;
  corpus.profiles = class_profiles(spec);

  std::vector<double> cdf_m(corpus.profiles.malware.size()), cdf_b(corpus.profiles.benign.size());
  double acc_m = 0.0, acc_b = 0.0;
  for (std::size_t i = 0; i < cdf_m.size(); ++i) {
    cdf_m[i] = acc_m += corpus.profiles.malware[i];
    cdf_b[i] = acc_b += corpus.profiles.benign[i];
  }

  Rng rng(derive_seed(spec.seed, 2));
  const std::size_t span = spec.max_length - spec.min_length + 1;
  corpus.traces.reserve(spec.n_samples);
  for (std::size_t s = 0; s < spec.n_samples; ++s) {
    ApiTrace trace;
    trace.sample_id = random_sha256(rng);
    const bool benign = rng.uniform01() < spec.benign_fraction;
    trace.label = benign ? SampleLabel::benign : SampleLabel::malware;
    const bool ambiguous = rng.uniform01() < spec.ambiguous_fraction;
    const std::size_t length = spec.min_length + static_cast<std::size_t>(rng.uniform_index(span));
    const auto& cdf = benign ? cdf_b : cdf_m;
    trace.calls.reserve(length);
    for (std::size_t k = 0; k < length; ++k) trace.calls.push_back(corpus.profiles.names[draw(rng, cdf)]);

    ManifestEntry entry{trace.sample_id, {std::string(to_string(*trace.label))}};
    if (ambiguous) entry.raw_labels = {"malware", "benign"};
    corpus.manifest.entries.push_back(std::move(entry));
    corpus.traces.push_back(std::move(trace));
  }
  return corpus;
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "traces");
  write_file(dir / "manifest.csv", serialize_manifest(corpus.manifest));
  for (const auto& trace : corpus.traces) {
    write_file(dir / "traces" / (trace.sample_id + ".json"), serialize_trace(trace));
  }
}

}  // namespace apifreq
