#ifndef MANIFOLD_VERSION_HPP
#define MANIFOLD_VERSION_HPP

namespace manifold {

inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace manifold

#endif
