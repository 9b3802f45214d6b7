// model_format.hpp
//
// Layout constants of the binary model files. All multi-byte fields are
// little-endian; floats are IEEE-754 binary64, matrices row-major.
//
//   detector: "OCKJ" | version u8 | kind u8 | m d D k (u32 each)
//             | landmarks m*D | P d*m | h | pi k | mu k*d | sigma k*d*d
//             | [threshold]
//   ocsvm:    "OSVM" | version u8 | n_sv D (u32 each)
//             | support vectors n_sv*D | alpha n_sv | rho | h
//
// Bit 7 of the detector kind byte records whether a threshold follows.

#ifndef OCKJL_MODEL_FORMAT_HPP
#define OCKJL_MODEL_FORMAT_HPP

#include <array>
#include <cstddef>
#include <cstdint>

namespace ockjl::format {

inline constexpr std::array<std::uint8_t, 4> detector_magic{'O', 'C', 'K', 'J'};
inline constexpr std::array<std::uint8_t, 4> ocsvm_magic{'O', 'S', 'V', 'M'};
inline constexpr std::uint8_t version = 1;
inline constexpr std::uint8_t threshold_bit = 0x80;

inline constexpr std::size_t detector_header_bytes = 4 + 1 + 1 + 4 * 4;
inline constexpr std::size_t ocsvm_header_bytes = 4 + 1 + 2 * 4;

} // namespace ockjl::format

#endif // OCKJL_MODEL_FORMAT_HPP
