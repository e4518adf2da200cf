#pragma once

namespace apifreq::detail {
__extension__ typedef unsigned __int128 u128;
}
