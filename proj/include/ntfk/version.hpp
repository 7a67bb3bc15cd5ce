#ifndef NTFK_VERSION_HPP
#define NTFK_VERSION_HPP

namespace ntfk {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ntfk

#endif  // NTFK_VERSION_HPP
