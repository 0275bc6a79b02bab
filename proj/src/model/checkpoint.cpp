#include "etpot/model/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace etpot::model {

namespace {

constexpr std::string_view kMagic = "ETPOTCKPT 1\n";

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  }
  return v;
}

void index_group(nlohmann::json& index, const char* group, const TensorMap& map) {
  for (std::size_t k = 0; k < map.size(); ++k) {
    index.push_back({{"group", group}, {"name", map.name(k)}, {"shape", map.at(k).shape()}});
  }
}

void append_data(std::string& out, const TensorMap& map) {
  for (std::size_t k = 0; k < map.size(); ++k) {
    for (double v : map.at(k).values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  KeyValueConfig model_keys;
  write_config(c.model, model_keys);
  nlohmann::json header;
  header["model"] = model_keys.values();
  header["settings"] = c.settings.values();
  header["seed"] = c.seed;
  header["progress"] = c.progress;
  nlohmann::json index = nlohmann::json::array();
  index_group(index, "parameters", c.parameters);
  index_group(index, "optimizer", c.optimizer);
  header["tensors"] = index;
  const std::string text = header.dump();

  std::string out(kMagic);
  put_u64(out, text.size());
  out += text;
  append_data(out, c.parameters);
  append_data(out, c.optimizer);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw CheckpointError("not a checkpoint file");
  std::size_t at = kMagic.size();
  if (bytes.size() < at + 8) throw CheckpointError("truncated checkpoint header");
  const std::uint64_t length = get_u64(bytes, at);
  at += 8;
  if (bytes.size() - at < length) throw CheckpointError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(at, length));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  at += length;

  Checkpoint c;
  try {
    KeyValueConfig model_keys;
    for (const auto& [k, v] : header.at("model").items()) model_keys.set(k, v.get<std::string>());
    c.model = read_config(model_keys);
    for (const auto& [k, v] : header.at("settings").items()) c.settings.set(k, v.get<std::string>());
    c.seed = header.at("seed").get<std::uint64_t>();
    c.progress = header.at("progress").get<std::map<std::string, double>>();
    for (const auto& entry : header.at("tensors")) {
      const auto shape = entry.at("shape").get<Shape>();
      const std::size_t n = ad::shape_size(shape);
      if ((bytes.size() - at) / 8 < n) throw CheckpointError("truncated tensor data");
      std::vector<double> values(n);
      for (std::size_t k = 0; k < n; ++k, at += 8) {
        values[k] = std::bit_cast<double>(get_u64(bytes, at));
      }
      const auto group = entry.at("group").get<std::string>();
      TensorMap& target = group == "parameters" ? c.parameters : c.optimizer;
      if (group != "parameters" && group != "optimizer") {
        throw CheckpointError("unknown tensor group '" + group + "'");
      }
      target.add(entry.at("name").get<std::string>(), Tensor(shape, std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("bad checkpoint: ") + e.what());
  }
  if (at != bytes.size()) throw CheckpointError("trailing bytes after tensor data");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace etpot::model
