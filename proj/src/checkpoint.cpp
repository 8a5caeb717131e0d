#include "decsal/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "decsal/errors.hpp"
#include "json.hpp"

namespace decsal {

namespace {

constexpr const char* kFormatTag = "decsal-checkpoint-v1";

void write_f64_le(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

nlohmann::ordered_json config_to_json(const ModelConfig& cfg) {
  return {{"vocab_size", cfg.vocab_size}, {"hidden", cfg.hidden},
          {"layers", cfg.layers},         {"heads", cfg.heads},
          {"n_max", cfg.n_max},           {"classes", cfg.classes},
          {"seed", cfg.seed},             {"tie_lm_embedding", cfg.tie_lm_embedding}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
  cfg.hidden = j.at("hidden").get<std::size_t>();
  cfg.layers = j.at("layers").get<std::size_t>();
  cfg.heads = j.at("heads").get<std::size_t>();
  cfg.n_max = j.at("n_max").get<std::size_t>();
  cfg.classes = j.at("classes").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.tie_lm_embedding = j.at("tie_lm_embedding").get<bool>();
  return cfg;
}

}  // namespace

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format"] = kFormatTag;
  header["config"] = config_to_json(m.config());
  header["lm_pretrained"] = m.lm_pretrained;
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& p : m.parameters()) {
    manifest.push_back({{"name", p.name},
                        {"rows", p.value->rows()},
                        {"cols", p.value->cols()},
                        {"offset", offset}});
    offset += p.value->size() * sizeof(double);
  }
  header["weights"] = std::move(manifest);
  header["payload_bytes"] = offset;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());
  out << header.dump() << "\n";
  for (const auto& p : m.parameters()) {
    const double* data = p.value->data();
    for (std::size_t i = 0; i < p.value->size(); ++i) write_f64_le(out, data[i]);
  }
  if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot read " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError("checkpoint: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: bad header: " + std::string(e.what()));
  }
  if (header.value("format", "") != kFormatTag) {
    throw DataError("checkpoint: unrecognized format tag");
  }
  Model m(config_from_json(header.at("config")));
  m.lm_pretrained = header.at("lm_pretrained").get<bool>();

  auto params = m.parameters();
  const auto& manifest = header.at("weights");
  if (manifest.size() != params.size()) {
    throw DataError("checkpoint: manifest lists " + std::to_string(manifest.size()) +
                    " weights, model has " + std::to_string(params.size()));
  }
  const std::streampos payload_start = in.tellg();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != params[i].name ||
        entry.at("rows").get<std::size_t>() != params[i].value->rows() ||
        entry.at("cols").get<std::size_t>() != params[i].value->cols()) {
      throw DataError("checkpoint: manifest entry " + std::to_string(i) +
                      " does not match weight " + params[i].name);
    }
    in.seekg(payload_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    double* data = params[i].value->data();
    for (std::size_t j = 0; j < params[i].value->size(); ++j) data[j] = read_f64_le(in);
    if (!in) throw DataError("checkpoint: truncated payload in " + path.string());
  }
  return m;
}

}  // namespace decsal
