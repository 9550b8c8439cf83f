#pragma once

// Checkpoint directory: manifest.json (configuration, vocabularies, the
// unknown-word store) and params.bin (named single-precision tensors).
//
// params.bin holds, per tensor in name order: u32 name length, name bytes,
// u32 rank, u32 dims[rank], then product(dims) little-endian IEEE-754 floats.

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "sintent/encoding.hpp"
#include "sintent/error.hpp"
#include "sintent/models.hpp"

namespace sintent {

inline constexpr int kCheckpointFormat = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kParamsFile = "params.bin";
inline constexpr const char* kReportFile = "train_report.tsv";

struct Checkpoint {
  IntentModel model;
  QueryEncoder encoder;
  std::vector<std::string> phi;
  std::string embeddings_path;
};

namespace checkpoint_detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw Error(ErrorCode::kParse, "params.bin is truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + p.string());
}

}  // namespace checkpoint_detail

inline std::string encode_params(const ParamSet& params) {
  using namespace checkpoint_detail;
  std::string out;
  for (const auto& [name, p] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.value.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

/// Fills `params` from the blob; names and shapes must match one to one.
inline void decode_params(const std::string& blob, ParamSet& params) {
  using namespace checkpoint_detail;
  std::size_t pos = 0, seen = 0;
  while (pos < blob.size()) {
    const std::uint32_t len = get_u32(blob, pos);
    if (pos + len > blob.size()) throw Error(ErrorCode::kParse, "params.bin is truncated");
    const std::string name = blob.substr(pos, len);
    pos += len;
    if (!params.contains(name)) throw Error(ErrorCode::kParse, "params.bin has unexpected tensor " + name);
    Tensor& t = params.at(name).value;
    const std::uint32_t rank = get_u32(blob, pos);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = get_u32(blob, pos);
    if (shape != t.shape)
      throw Error(ErrorCode::kParse, "tensor " + name + " has shape " + shape_string(shape) + ", model expects " +
                                         shape_string(t.shape));
    for (double& v : t.data) v = static_cast<double>(std::bit_cast<float>(get_u32(blob, pos)));
    ++seen;
  }
  if (seen != params.entry_count())
    throw Error(ErrorCode::kParse, "params.bin holds " + std::to_string(seen) + " tensors, model has " +
                                       std::to_string(params.entry_count()));
}

inline nlohmann::json manifest_json(const IntentModel& model, const QueryEncoder& enc,
                                    const std::vector<std::string>& phi, const std::string& embeddings_path) {
  const ModelConfig& c = model.config();
  nlohmann::json j;
  j["format_version"] = kCheckpointFormat;
  j["model"] = {{"representation", to_string(c.representation)},
                {"mode", to_string(c.mode)},
                {"lstm_size", c.lstm_size},
                {"fc_hidden", c.fc_hidden},
                {"num_programs", c.num_programs},
                {"char_dict_size", c.char_dict_size},
                {"word_dim", c.word_dim},
                {"cell_candidate", to_string(c.cell_candidate)},
                {"seed", c.seed}};
  j["embedding_frozen"] = model.embedding_frozen();
  j["programs"] = phi;
  std::vector<std::uint32_t> symbols;
  for (char32_t s : enc.char_dict().symbols()) symbols.push_back(static_cast<std::uint32_t>(s));
  j["char_symbols"] = symbols;
  nlohmann::json emb = {{"path", embeddings_path}};
  if (const EmbeddingTable* t = enc.embeddings()) {
    emb["dim"] = t->dim();
    emb["unk_seed"] = t->unk_seed();
    nlohmann::json unk = nlohmann::json::object();
    for (const auto& [tok, v] : t->unk_snapshot()) unk[tok] = v;
    emb["unk_vectors"] = unk;
  }
  j["embeddings"] = emb;
  return j;
}

inline void save_checkpoint(const std::string& dir, const IntentModel& model, const QueryEncoder& enc,
                            const std::vector<std::string>& phi, const std::string& embeddings_path = "") {
  namespace fs = std::filesystem;
  if (const EmbeddingTable* t = enc.embeddings(); t && t->known_count() > 0 && embeddings_path.empty())
    throw Error(ErrorCode::kUsage, "checkpoint needs the path of the loaded word vectors");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create checkpoint directory " + dir + ": " + ec.message());
  checkpoint_detail::write_file(fs::path(dir) / kManifestFile,
                                manifest_json(model, enc, phi, embeddings_path).dump(2) + "\n");
  checkpoint_detail::write_file(fs::path(dir) / kParamsFile, encode_params(model.params()));
}

/// Rebuilds model and encoder. Word vectors are reloaded from the recorded
/// embeddings path when it is set; the unknown-word store is restored as saved.
inline Checkpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(checkpoint_detail::read_file(fs::path(dir) / kManifestFile));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, dir + "/manifest.json: " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormat)
      throw Error(ErrorCode::kParse, "unsupported checkpoint format " + j.at("format_version").dump());
    const auto& m = j.at("model");
    ModelConfig c;
    c.representation = parse_representation(m.at("representation").get<std::string>());
    c.mode = parse_context_mode(m.at("mode").get<std::string>());
    c.lstm_size = m.at("lstm_size").get<std::size_t>();
    c.fc_hidden = m.at("fc_hidden").get<std::size_t>();
    c.num_programs = m.at("num_programs").get<std::size_t>();
    c.char_dict_size = m.at("char_dict_size").get<std::size_t>();
    c.word_dim = m.at("word_dim").get<std::size_t>();
    c.cell_candidate = parse_cell_candidate(m.at("cell_candidate").get<std::string>());
    c.seed = m.at("seed").get<std::uint64_t>();

    std::vector<char32_t> symbols;
    for (auto s : j.at("char_symbols").get<std::vector<std::uint32_t>>()) symbols.push_back(static_cast<char32_t>(s));
    CharDict dict(symbols);

    std::shared_ptr<EmbeddingTable> table;
    const auto& emb = j.at("embeddings");
    const std::string path = emb.value("path", std::string());
    if (emb.contains("dim")) {
      table = path.empty() ? std::make_shared<EmbeddingTable>(emb.at("dim").get<std::size_t>())
                           : std::make_shared<EmbeddingTable>(load_embeddings(path));
      if (table->dim() != emb.at("dim").get<std::size_t>())
        throw Error(ErrorCode::kVocabMismatch, "embeddings at " + path + " changed dimension since training");
      table->set_unk_seed(emb.at("unk_seed").get<std::uint64_t>());
      std::map<std::string, std::vector<double>> unk;
      for (const auto& [tok, v] : emb.at("unk_vectors").items()) unk[tok] = v.get<std::vector<double>>();
      table->restore_unk(unk);
    }

    IntentModel model(c);
    decode_params(checkpoint_detail::read_file(fs::path(dir) / kParamsFile), model.params());
    if (j.value("embedding_frozen", false)) model.freeze_embedding();
    auto phi = j.at("programs").get<std::vector<std::string>>();
    if (phi.size() != c.num_programs) throw Error(ErrorCode::kParse, "program list does not match num_programs");
    QueryEncoder enc(c.representation, dict, table);
    if (uses_chars(c.representation) && dict.size() != c.char_dict_size)
      throw Error(ErrorCode::kParse, "char dictionary does not match char_dict_size");
    return Checkpoint{std::move(model), std::move(enc), std::move(phi), path};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, dir + "/manifest.json: " + e.what());
  }
}

}  // namespace sintent
