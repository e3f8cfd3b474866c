#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdps/core/volume_io.hpp"

// Multi-coil k-space measurements grouped by motion state.
//
// State t holds C * K_t complex samples, coil-major: sample (t, c, k) sits at
// data[t][c * K_t + k], where k walks the plan's line-major/readout-minor
// order. K_t can differ by one readout line across states when the shot count
// does not divide the sampled lines evenly.
//
// Container format (same framing as the volume container):
//   "MDPSKSP1" | uint32 LE header length | JSON header | float32 LE payload
// header: {"num_coils", "samples_per_time": [K_t...], "plan_ref",
//          "noise_sigma", "norm_scale"}; payload is (re, im) pairs in
// (t, c, k) order.

namespace mdps {

struct KSpaceSet {
  int num_coils = 0;
  std::vector<std::vector<cd>> data;  // [t][c * K_t + k]
  std::string plan_ref;
  double noise_sigma = 0.0;  // complex std used at simulation time
  double norm_scale = 1.0;   // intensity scale divided out, 1 = none

  int num_times() const { return static_cast<int>(data.size()); }
  std::int64_t samples_per_time(int t) const {
    return num_coils == 0
               ? 0
               : static_cast<std::int64_t>(
                     data[static_cast<std::size_t>(t)].size()) /
                     num_coils;
  }
  cd* coil_block(int t, int c) {
    return data[static_cast<std::size_t>(t)].data() +
           static_cast<std::size_t>(c) *
               static_cast<std::size_t>(samples_per_time(t));
  }
  const cd* coil_block(int t, int c) const {
    return data[static_cast<std::size_t>(t)].data() +
           static_cast<std::size_t>(c) *
               static_cast<std::size_t>(samples_per_time(t));
  }
};

namespace detail {
constexpr char kKspaceMagic[8] = {'M', 'D', 'P', 'S', 'K', 'S', 'P', '1'};
}

inline void save_kspace(const KSpaceSet& k, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  nlohmann::json header = {{"num_coils", k.num_coils},
                           {"plan_ref", k.plan_ref},
                           {"noise_sigma", k.noise_sigma},
                           {"norm_scale", k.norm_scale}};
  auto& spt = header["samples_per_time"] = nlohmann::json::array();
  for (int t = 0; t < k.num_times(); ++t) spt.push_back(k.samples_per_time(t));
  const std::string htext = header.dump();
  const auto hlen = static_cast<std::uint32_t>(htext.size());
  detail::write_exact(os, detail::kKspaceMagic, 8);
  detail::write_exact(os, &hlen, 4);
  detail::write_exact(os, htext.data(), htext.size());
  for (const auto& block : k.data) {
    std::vector<float> payload(block.size() * 2);
    for (std::size_t i = 0; i < block.size(); ++i) {
      payload[2 * i] = static_cast<float>(block[i].real());
      payload[2 * i + 1] = static_cast<float>(block[i].imag());
    }
    detail::write_exact(os, payload.data(), payload.size() * sizeof(float));
  }
}

inline KSpaceSet load_kspace(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  char magic[8];
  detail::read_exact(is, magic, 8, "magic");
  if (std::memcmp(magic, detail::kKspaceMagic, 8) != 0)
    throw std::runtime_error(path + ": not a k-space container (bad magic)");
  std::uint32_t hlen = 0;
  detail::read_exact(is, &hlen, 4, "header length");
  std::string header(hlen, '\0');
  detail::read_exact(is, header.data(), hlen, "header");
  nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error(path + ": malformed k-space header JSON");

  KSpaceSet k;
  k.num_coils = j.at("num_coils").get<int>();
  k.plan_ref = j.at("plan_ref").get<std::string>();
  k.noise_sigma = j.at("noise_sigma").get<double>();
  k.norm_scale = j.at("norm_scale").get<double>();
  for (const auto& spt : j.at("samples_per_time")) {
    const auto count = spt.get<std::int64_t>() * k.num_coils;
    std::vector<float> payload(static_cast<std::size_t>(count) * 2);
    detail::read_exact(is, payload.data(), payload.size() * sizeof(float),
                       "payload");
    std::vector<cd> block(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < block.size(); ++i)
      block[i] = cd(static_cast<double>(payload[2 * i]),
                    static_cast<double>(payload[2 * i + 1]));
    k.data.push_back(std::move(block));
  }
  char extra;
  is.read(&extra, 1);
  if (is.gcount() != 0)
    throw std::runtime_error(path + ": payload sample count mismatch");
  return k;
}

}  // namespace mdps
