#pragma once

#include <cstdint>
#include <filesystem>

#include "pauie/net.hpp"

// Binary checkpoint: "PAUIE", u32 version, u64 iteration, length-prefixed
// NetConfig JSON, then parameters and buffers as (name, dtype, ndim, dims, data).
// Little-endian, doubles stored verbatim.
namespace pauie::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Checkpoint {
  net::NetConfig config;
  std::uint64_t iteration = 0;
  net::ParameterStore store;
};

void save(const std::filesystem::path& path, const net::PaUieNet& model, std::uint64_t iteration);
Checkpoint load(const std::filesystem::path& path);
/// Loads and rebuilds the network in eval mode.
net::PaUieNet load_model(const std::filesystem::path& path, std::uint64_t* iteration = nullptr);

}  // namespace pauie::checkpoint
