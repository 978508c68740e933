#pragma once

// Binary checkpoint layout:
//   8 bytes   magic "IFCKPT1\n"
//   u64 LE    header length h
//   h bytes   JSON header (model dims, training metadata)
//   u64 LE    parameter count p (number of reals)
//   p x f64   parameter values, little-endian, in ModelBundle::all_params order

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "infofair/data.hpp"
#include "infofair/model.hpp"

namespace infofair {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'I', 'F', 'C', 'K', 'P', 'T', '1', '\n'};

inline nlohmann::json to_json(const ModelDims& d) {
  return {{"input_dim", d.extractor.input_dim},
          {"hidden", d.extractor.hidden},
          {"embed_dim", d.extractor.embed_dim},
          {"num_classes", d.num_classes},
          {"group_card", d.group_card}};
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  d.extractor.input_dim = j.at("input_dim").get<std::size_t>();
  d.extractor.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  d.extractor.embed_dim = j.at("embed_dim").get<std::size_t>();
  d.num_classes = j.at("num_classes").get<std::size_t>();
  d.group_card = j.at("group_card").get<std::size_t>();
  return d;
}

inline nlohmann::json to_json(const Standardizer& s) {
  return {{"columns", s.columns}, {"mean", s.mean}, {"stddev", s.stddev}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  return {j.at("columns").get<std::vector<std::size_t>>(), j.at("mean").get<std::vector<double>>(),
          j.at("stddev").get<std::vector<double>>()};
}

struct Checkpoint {
  ModelBundle bundle;
  nlohmann::json meta;  // free-form training metadata; "dims" is filled on save
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError(std::string("truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  nlohmann::json meta = ck.meta;
  meta["dims"] = to_json(ck.bundle.dims);
  const std::string header = meta.dump();
  out.write(kCheckpointMagic, 8);
  detail::put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::uint64_t count = 0;
  for (const auto& p : ck.bundle.all_params()) count += p.size();
  detail::put_u64(out, count);
  for (const auto& p : ck.bundle.all_params()) {
    for (double v : p.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      detail::put_u64(out, bits);
    }
  }
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::uint64_t h = detail::get_u64(in, "header length");
  if (h > (1u << 26)) throw CheckpointError("checkpoint header too large");
  std::string header(h, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(h))) throw CheckpointError("truncated header");
  Checkpoint ck;
  try {
    ck.meta = nlohmann::json::parse(header);
    ck.bundle = init_model(dims_from_json(ck.meta.at("dims")), 0);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  std::uint64_t expected = 0;
  for (const auto& p : ck.bundle.all_params()) expected += p.size();
  const std::uint64_t count = detail::get_u64(in, "parameter count");
  if (count != expected) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " values but its dims need " +
                          std::to_string(expected));
  }
  for (auto& p : ck.bundle.all_params()) {
    for (double& v : p.mutable_values()) {
      const std::uint64_t bits = detail::get_u64(in, "parameters");
      std::memcpy(&v, &bits, sizeof v);
    }
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  write_checkpoint(out, ck);
  if (!out) throw CheckpointError("error writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace infofair
