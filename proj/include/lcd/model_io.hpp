#pragma once
// Flat binary checkpoint format for named parameter tensors: header, then for
// each tensor its name, element count, scalar width, and raw bytes.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lcd/error.hpp"
#include "lcd/nn.hpp"

namespace lcd::nn {

inline constexpr uint32_t kModelMagic = 0x4c43444dU;  // "MDCL"

template <typename S>
inline void save_params(const std::filesystem::path& path, const std::vector<Param<S>>& params) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::io_error, "cannot write " + path.string());
  auto put_u32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  put_u32(kModelMagic);
  put_u32(1);  // version
  put_u32(static_cast<uint32_t>(params.size()));
  put_u32(static_cast<uint32_t>(sizeof(S)));
  for (const auto& p : params) {
    put_u32(static_cast<uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(static_cast<uint32_t>(p.value->size()));
    os.write(reinterpret_cast<const char*>(p.value->data()),
             static_cast<std::streamsize>(p.value->size() * sizeof(S)));
  }
}

// Loads into an already-built model whose parameter names and shapes match.
template <typename S>
inline void load_params(const std::filesystem::path& path, std::vector<Param<S>>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::not_found, "checkpoint not found: " + path.string());
  auto get_u32 = [&]() {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  if (get_u32() != kModelMagic) fail(ErrorCode::invalid_input, "bad checkpoint magic");
  if (get_u32() != 1) fail(ErrorCode::invalid_input, "unsupported checkpoint version");
  uint32_t count = get_u32();
  if (count != params.size())
    fail(ErrorCode::invalid_input, "checkpoint tensor count mismatch");
  if (get_u32() != sizeof(S)) fail(ErrorCode::invalid_input, "checkpoint scalar width mismatch");
  for (auto& p : params) {
    uint32_t name_len = get_u32();
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (name != p.name)
      fail(ErrorCode::invalid_input, "checkpoint tensor order mismatch: " + name);
    uint32_t n = get_u32();
    if (n != p.value->size())
      fail(ErrorCode::invalid_input, "checkpoint tensor size mismatch: " + name);
    is.read(reinterpret_cast<char*>(p.value->data()),
            static_cast<std::streamsize>(n * sizeof(S)));
  }
  if (!is) fail(ErrorCode::io_error, "truncated checkpoint: " + path.string());
}

}  // namespace lcd::nn
