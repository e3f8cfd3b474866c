#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdps/core/volume.hpp"

// Volume container format:
//
//   bytes 0..7   magic "MDPSVOL1"
//   bytes 8..11  uint32 little-endian JSON header length H
//   bytes 12..   H bytes of UTF-8 JSON: {"dtype": "complex64"|"float32",
//                "shape": [nz,ny,nx], "spacing_mm": [sz,sy,sx]}
//   payload      float32 little-endian samples, row-major with x fastest;
//                complex volumes store (re, im) pairs per sample
//
// save -> load -> save reproduces the file byte for byte; load(save(v)) == v
// holds exactly whenever the samples are float32-representable (in-memory
// math is double precision, the container is deliberately float32).

namespace mdps {

static_assert(std::endian::native == std::endian::little,
              "volume container I/O assumes a little-endian host");

namespace detail {

constexpr char kVolumeMagic[8] = {'M', 'D', 'P', 'S', 'V', 'O', 'L', '1'};

inline void write_exact(std::ofstream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw std::runtime_error("volume write failed");
}

inline void read_exact(std::ifstream& is, void* p, std::size_t n,
                       const std::string& what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n))
    throw std::runtime_error("volume read: truncated " + what);
}

inline nlohmann::json read_volume_header(std::ifstream& is,
                                         const std::string& path) {
  char magic[8];
  read_exact(is, magic, 8, "magic");
  if (std::memcmp(magic, kVolumeMagic, 8) != 0)
    throw std::runtime_error(path + ": not a volume container (bad magic)");
  std::uint32_t hlen = 0;
  read_exact(is, &hlen, 4, "header length");
  std::string header(hlen, '\0');
  read_exact(is, header.data(), hlen, "header");
  nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error(path + ": malformed volume header JSON");
  return j;
}

template <typename Grid>
void write_volume_file(const std::string& path, const Grid& v,
                       const char* dtype, const std::vector<float>& payload) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  nlohmann::json header = {
      {"dtype", dtype},
      {"shape", {v.shape.nz, v.shape.ny, v.shape.nx}},
      {"spacing_mm", {v.spacing.sz, v.spacing.sy, v.spacing.sx}}};
  const std::string htext = header.dump();
  const auto hlen = static_cast<std::uint32_t>(htext.size());
  write_exact(os, kVolumeMagic, 8);
  write_exact(os, &hlen, 4);
  write_exact(os, htext.data(), htext.size());
  write_exact(os, payload.data(), payload.size() * sizeof(float));
}

}  // namespace detail

inline void save_volume(const ComplexVolume& v, const std::string& path) {
  std::vector<float> payload(static_cast<std::size_t>(v.size()) * 2);
  for (std::int64_t i = 0; i < v.size(); ++i) {
    payload[2 * i] = static_cast<float>(v[i].real());
    payload[2 * i + 1] = static_cast<float>(v[i].imag());
  }
  detail::write_volume_file(path, v, "complex64", payload);
}

inline void save_volume(const RealVolume& v, const std::string& path) {
  std::vector<float> payload(static_cast<std::size_t>(v.size()));
  for (std::int64_t i = 0; i < v.size(); ++i)
    payload[i] = static_cast<float>(v[i]);
  detail::write_volume_file(path, v, "float32", payload);
}

namespace detail {

template <typename Grid>
Grid load_volume_as(const std::string& path, const char* want_dtype,
                    int floats_per_sample, auto assign) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  const nlohmann::json j = read_volume_header(is, path);
  const std::string dtype = j.at("dtype").get<std::string>();
  if (dtype != want_dtype)
    throw std::runtime_error(path + ": dtype is '" + dtype + "', expected '" +
                             want_dtype + "'");
  const auto sh = j.at("shape");
  const auto sp = j.at("spacing_mm");
  Grid v(Shape3{sh.at(0).get<std::int64_t>(), sh.at(1).get<std::int64_t>(),
                sh.at(2).get<std::int64_t>()},
         Spacing3{sp.at(0).get<double>(), sp.at(1).get<double>(),
                  sp.at(2).get<double>()});
  std::vector<float> payload(static_cast<std::size_t>(v.size()) *
                             static_cast<std::size_t>(floats_per_sample));
  read_exact(is, payload.data(), payload.size() * sizeof(float), "payload");
  // A well-formed file ends exactly after the payload.
  char extra;
  is.read(&extra, 1);
  if (is.gcount() != 0)
    throw std::runtime_error(path + ": payload sample count mismatch");
  for (std::int64_t i = 0; i < v.size(); ++i) assign(v[i], &payload[0], i);
  return v;
}

}  // namespace detail

inline ComplexVolume load_volume(const std::string& path) {
  return detail::load_volume_as<ComplexVolume>(
      path, "complex64", 2, [](cd& out, const float* p, std::int64_t i) {
        out = cd(static_cast<double>(p[2 * i]),
                 static_cast<double>(p[2 * i + 1]));
      });
}

inline RealVolume load_real_volume(const std::string& path) {
  return detail::load_volume_as<RealVolume>(
      path, "float32", 1, [](double& out, const float* p, std::int64_t i) {
        out = static_cast<double>(p[i]);
      });
}

}  // namespace mdps
