#pragma once

// Checkpoint format ("HSFN"): magic, version u32=1, metadata (epoch, scale,
// bands u32), named parameter blocks (u32 name length, name bytes, u32 rank,
// u32 dims, f32 payload), then an optional AdamW state section (step count,
// hyperparameters, first/second moment payloads in parameter order).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hsifuse/io.hpp"
#include "hsifuse/optim.hpp"

namespace hsifuse {

struct CheckpointMeta {
  std::uint32_t epoch = 0;
  std::uint32_t scale = 0;
  std::uint32_t bands = 0;
};

namespace detail {

template <typename T>
inline void write_f32_cast(std::ostream& os, const std::vector<T>& v) {
  std::vector<float> buf(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) buf[i] = static_cast<float>(v[i]);
  write_f32(os, buf.data(), buf.size());
}

template <typename T>
inline void read_f32_cast(std::istream& is, std::vector<T>& v, const std::string& what) {
  std::vector<float> buf(v.size());
  if (!read_f32(is, buf.data(), buf.size())) {
    throw IoError(IoError::Kind::truncated, "checkpoint: truncated " + what);
  }
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(buf[i]);
}

}  // namespace detail

template <typename T>
inline void save_checkpoint(const std::string& path, const ParamSet<T>& params,
                            const CheckpointMeta& meta, const AdamW<T>* optimizer = nullptr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoError::Kind::open_failed, "save_checkpoint: cannot open " + path);
  os.write("HSFN", 4);
  detail::write_u32(os, 1u);
  detail::write_u32(os, meta.epoch);
  detail::write_u32(os, meta.scale);
  detail::write_u32(os, meta.bands);
  detail::write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params.items()) {
    detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) detail::write_u32(os, static_cast<std::uint32_t>(d));
    detail::write_f32_cast(os, t.values());
  }
  os.put(optimizer ? 1 : 0);
  if (optimizer) {
    const auto& o = optimizer->options();
    const std::uint64_t step = static_cast<std::uint64_t>(optimizer->step_count());
    os.write(reinterpret_cast<const char*>(&step), 8);
    const double hp[5] = {static_cast<double>(o.lr), static_cast<double>(o.beta1),
                          static_cast<double>(o.beta2), static_cast<double>(o.eps),
                          static_cast<double>(o.weight_decay)};
    os.write(reinterpret_cast<const char*>(hp), sizeof(hp));
    for (const auto& m : optimizer->first_moments()) detail::write_f32_cast(os, m);
    for (const auto& v : optimizer->second_moments()) detail::write_f32_cast(os, v);
  }
  if (!os) throw IoError(IoError::Kind::open_failed, "save_checkpoint: write failed for " + path);
}

/// Loads parameters (and optionally optimizer state) into an existing,
/// identically-constructed network. Name or shape mismatches raise an
/// explicit version error.
template <typename T>
inline CheckpointMeta load_checkpoint(const std::string& path, ParamSet<T>& params,
                                      AdamW<T>* optimizer = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::open_failed, "load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "HSFN", 4) != 0) {
    throw IoError(IoError::Kind::bad_magic, "load_checkpoint: bad magic in " + path);
  }
  std::uint32_t version, count;
  CheckpointMeta meta;
  if (!detail::read_u32(is, version) || !detail::read_u32(is, meta.epoch) ||
      !detail::read_u32(is, meta.scale) || !detail::read_u32(is, meta.bands) ||
      !detail::read_u32(is, count)) {
    throw IoError(IoError::Kind::truncated, "load_checkpoint: truncated header");
  }
  if (version != 1) {
    throw IoError(IoError::Kind::bad_version, "load_checkpoint: unsupported version");
  }
  if (count != params.size()) {
    throw IoError(IoError::Kind::bad_version,
                  "load_checkpoint: parameter count mismatch (incompatible network shape)");
  }
  for (auto& [name, t] : params.items()) {
    std::uint32_t name_len;
    if (!detail::read_u32(is, name_len) || name_len > 4096) {
      throw IoError(IoError::Kind::truncated, "load_checkpoint: truncated parameter block");
    }
    std::string fname(name_len, '\0');
    is.read(fname.data(), name_len);
    std::uint32_t rank;
    if (static_cast<std::size_t>(is.gcount()) != name_len || !detail::read_u32(is, rank)) {
      throw IoError(IoError::Kind::truncated, "load_checkpoint: truncated parameter block");
    }
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint32_t v;
      if (!detail::read_u32(is, v)) {
        throw IoError(IoError::Kind::truncated, "load_checkpoint: truncated shape");
      }
      d = static_cast<int>(v);
    }
    if (fname != name || shape != t.shape()) {
      throw IoError(IoError::Kind::bad_version,
                    "load_checkpoint: incompatible parameter '" + fname + "' (expected '" + name +
                        "')");
    }
    detail::read_f32_cast(is, t.values_mut(), "parameter '" + name + "'");
  }
  int has_opt = is.get();
  if (has_opt == 1 && optimizer) {
    std::uint64_t step;
    double hp[5];
    is.read(reinterpret_cast<char*>(&step), 8);
    is.read(reinterpret_cast<char*>(hp), sizeof(hp));
    if (!is) throw IoError(IoError::Kind::truncated, "load_checkpoint: truncated optimizer state");
    optimizer->set_step_count(static_cast<long>(step));
    for (auto& m : optimizer->first_moments()) detail::read_f32_cast(is, m, "optimizer moment");
    for (auto& v : optimizer->second_moments()) detail::read_f32_cast(is, v, "optimizer moment");
  }
  return meta;
}

}  // namespace hsifuse
