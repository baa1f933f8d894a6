#pragma once
// FNV-1a content hashing. Prior ids are content-addressed and model parameter
// groups are audited via these checksums, so the byte order fed in is part of
// the on-disk contract.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lcd {

class Fnv1a {
 public:
  void update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }

  template <typename T>
  void update_pod(const T& v) {
    update(&v, sizeof(T));
  }

  template <typename T>
  void update_vec(const std::vector<T>& v) {
    update(v.data(), v.size() * sizeof(T));
  }

  uint64_t value() const { return h_; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    uint64_t v = h_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<size_t>(i)] = digits[v & 0xf];
      v >>= 4;
    }
    return out;
  }

 private:
  uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(const void* data, size_t n) {
  Fnv1a h;
  h.update(data, n);
  return h.hex();
}

}  // namespace lcd
