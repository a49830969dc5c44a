#include "mop/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "mop/binary_io.hpp"
#include "mop/descriptors.hpp"
#include "mop/errors.hpp"

namespace mop {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'M', 'O', 'P', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kKindJson = 1;
constexpr std::uint8_t kKindMatrix = 2;
constexpr std::uint8_t kKindVector = 3;
const char* const kFingerprintSection = "fingerprint";

void append_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

void append_u32(std::string& buf, std::uint32_t v) { append_bytes(buf, &v, sizeof v); }
void append_u64(std::string& buf, std::uint64_t v) { append_bytes(buf, &v, sizeof v); }

std::string matrix_payload(const Matrix& m) {
  std::string buf;
  append_u32(buf, static_cast<std::uint32_t>(m.rows));
  append_u32(buf, static_cast<std::uint32_t>(m.cols));
  append_bytes(buf, m.data.data(), m.data.size() * sizeof(double));
  return buf;
}

std::string vector_payload(const std::vector<double>& v) {
  std::string buf;
  append_u64(buf, v.size());
  append_bytes(buf, v.data(), v.size() * sizeof(double));
  return buf;
}

struct RawSection {
  std::string name;
  std::uint8_t kind = 0;
  std::string payload;
};

// Sections in their serialized order (sorted by name, fingerprint excluded),
// which is also the order the fingerprint hash consumes them in.
std::vector<RawSection> collect_sections(const ModelFile& file) {
  std::map<std::string, RawSection> by_name;
  auto add = [&by_name](std::string name, std::uint8_t kind, std::string payload) {
    if (name == kFingerprintSection)
      throw std::invalid_argument("model file: section name 'fingerprint' is reserved");
    if (!by_name.emplace(name, RawSection{name, kind, std::move(payload)}).second)
      throw std::invalid_argument("model file: duplicate section name: " + name);
  };
  for (const auto& [name, text] : file.json_sections) add(name, kKindJson, text);
  for (const auto& [name, m] : file.matrix_sections) add(name, kKindMatrix, matrix_payload(m));
  for (const auto& [name, v] : file.vector_sections) add(name, kKindVector, vector_payload(v));
  std::vector<RawSection> out;
  out.reserve(by_name.size());
  for (auto& [name, sec] : by_name) out.push_back(std::move(sec));
  return out;
}

std::uint64_t sections_fingerprint(const std::vector<RawSection>& sections) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& s : sections) {
    h = fnv1a64(s.name.data(), s.name.size(), h);
    h = fnv1a64(&s.kind, 1, h);
    h = fnv1a64(s.payload.data(), s.payload.size(), h);
  }
  return h;
}

void write_section(std::ostream& out, const RawSection& s) {
  write_u32(out, static_cast<std::uint32_t>(s.name.size()));
  out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
  out.put(static_cast<char>(s.kind));
  write_u64(out, s.payload.size());
  out.write(s.payload.data(), static_cast<std::streamsize>(s.payload.size()));
}

Matrix parse_matrix_payload(const std::string& payload, const std::string& name) {
  std::istringstream in(payload);
  std::uint32_t rows = read_u32(in, name.c_str());
  std::uint32_t cols = read_u32(in, name.c_str());
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in || payload.size() != 8 + m.data.size() * sizeof(double))
    throw std::invalid_argument("model file: malformed matrix section: " + name);
  return m;
}

std::vector<double> parse_vector_payload(const std::string& payload, const std::string& name) {
  std::istringstream in(payload);
  std::uint64_t len = read_u64(in, name.c_str());
  std::vector<double> v(len);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(len * sizeof(double)));
  if (!in || payload.size() != 8 + len * sizeof(double))
    throw std::invalid_argument("model file: malformed vector section: " + name);
  return v;
}

json parse_json_text(const std::string& text, const std::string& where) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw std::invalid_argument("model file: malformed JSON section: " + where);
  return j;
}

// --- pipeline model <-> sections ---

json grid_to_json(const GridConfig& g) {
  return json{{"frame", g.frame}, {"level_sides", g.level_sides}, {"stride", g.stride}};
}

GridConfig grid_from_json(const json& j) {
  GridConfig g;
  g.frame = j.at("frame").get<int>();
  g.level_sides = j.at("level_sides").get<std::vector<int>>();
  g.stride = j.at("stride").get<int>();
  return g;
}

json vlad_to_json(const VladConfig& v) {
  return json{{"r", v.r}, {"sigma", v.sigma}, {"power_alpha", v.power_alpha}};
}

VladConfig vlad_from_json(const json& j) {
  VladConfig v;
  v.r = j.at("r").get<std::size_t>();
  v.sigma = j.at("sigma").get<double>();
  v.power_alpha = j.at("power_alpha").get<double>();
  return v;
}

json strategy_to_json(const ScaleStrategy& s) {
  std::vector<int> nums;
  for (Level l : s.levels) nums.push_back(level_number(l));
  return json{{"mode", scale_mode_name(s.mode)}, {"levels", nums}};
}

ScaleStrategy strategy_from_json(const json& j) {
  ScaleStrategy s;
  s.mode = scale_mode_from_name(j.at("mode").get<std::string>());
  s.levels.clear();
  for (int n : j.at("levels").get<std::vector<int>>()) s.levels.push_back(level_from_number(n));
  return s;
}

void put_pca(ModelFile& file, const std::string& prefix, const PcaModel& pca) {
  file.json_sections[prefix + ".meta"] =
      json{{"whiten", pca.whiten}, {"epsilon", pca.epsilon}}.dump();
  file.vector_sections[prefix + ".mean"] = pca.mean;
  file.vector_sections[prefix + ".eigenvalues"] = pca.eigenvalues;
  file.matrix_sections[prefix + ".components"] = pca.components;
}

PcaModel get_pca(const ModelFile& file, const std::string& prefix) {
  PcaModel pca;
  json meta = parse_json_text(file.json_sections.at(prefix + ".meta"), prefix + ".meta");
  pca.whiten = meta.at("whiten").get<bool>();
  pca.epsilon = meta.at("epsilon").get<double>();
  pca.mean = file.vector_sections.at(prefix + ".mean");
  pca.eigenvalues = file.vector_sections.at(prefix + ".eigenvalues");
  pca.components = file.matrix_sections.at(prefix + ".components");
  if (pca.components.rows != pca.eigenvalues.size() || pca.components.cols != pca.mean.size())
    throw std::invalid_argument("model file: inconsistent PCA sections under " + prefix);
  return pca;
}

void put_bundle(ModelFile& file, const std::string& stage, const LevelModels& models) {
  if (models.patch_pca) put_pca(file, stage + ".patch_pca", *models.patch_pca);
  if (models.codebook) file.matrix_sections[stage + ".codebook"] = models.codebook->centers;
  if (models.pooled_pca) put_pca(file, stage + ".pooled_pca", *models.pooled_pca);
}

LevelModels get_bundle(const ModelFile& file, const std::string& stage) {
  LevelModels models;
  if (file.json_sections.count(stage + ".patch_pca.meta"))
    models.patch_pca = get_pca(file, stage + ".patch_pca");
  if (file.matrix_sections.count(stage + ".codebook"))
    models.codebook = Codebook{file.matrix_sections.at(stage + ".codebook")};
  if (file.json_sections.count(stage + ".pooled_pca.meta"))
    models.pooled_pca = get_pca(file, stage + ".pooled_pca");
  return models;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes) { return fnv1a64(bytes.data(), bytes.size()); }

std::string fingerprint_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

void write_model_file(const std::string& path, ModelFile& file) {
  std::vector<RawSection> sections = collect_sections(file);
  file.fingerprint = fingerprint_hex(sections_fingerprint(sections));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(sections.size() + 1));
  RawSection fp{kFingerprintSection, kKindJson, json{{"fnv1a64", file.fingerprint}}.dump()};
  write_section(out, fp);
  for (const auto& s : sections) write_section(out, s);
  if (!out) throw std::invalid_argument("write failed: " + path);
}

ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path);
  expect_magic(in, kMagic, path);
  std::uint32_t version = read_u32(in, "version");
  if (version != kVersion)
    throw std::invalid_argument("unsupported model file version " + std::to_string(version) +
                                " in " + path);
  std::uint32_t count = read_u32(in, "section count");

  ModelFile file;
  std::vector<RawSection> sections;
  std::string stored_fp;
  for (std::uint32_t i = 0; i < count; ++i) {
    RawSection s;
    std::uint32_t name_len = read_u32(in, "section name length");
    if (name_len > 4096)
      throw std::invalid_argument("unreasonable section name length in " + path);
    s.name.resize(name_len);
    in.read(s.name.data(), name_len);
    int kind = in.get();
    std::uint64_t payload_len = read_u64(in, "section payload length");
    if (payload_len > (1ULL << 33))
      throw std::invalid_argument("unreasonable section size in " + path);
    s.payload.resize(payload_len);
    in.read(s.payload.data(), static_cast<std::streamsize>(payload_len));
    if (!in || kind == EOF)
      throw std::invalid_argument("truncated section in " + path);
    s.kind = static_cast<std::uint8_t>(kind);

    if (s.name == kFingerprintSection) {
      stored_fp = parse_json_text(s.payload, s.name).at("fnv1a64").get<std::string>();
      continue;
    }
    switch (s.kind) {
      case kKindJson: file.json_sections[s.name] = s.payload; break;
      case kKindMatrix: file.matrix_sections[s.name] = parse_matrix_payload(s.payload, s.name); break;
      case kKindVector: file.vector_sections[s.name] = parse_vector_payload(s.payload, s.name); break;
      default:
        throw std::invalid_argument("unknown section kind " + std::to_string(kind) + " in " + path);
    }
    sections.push_back(std::move(s));
  }
  if (in.peek() != EOF)
    throw std::invalid_argument("trailing bytes after last section in " + path);
  if (stored_fp.empty())
    throw std::invalid_argument("missing fingerprint section in " + path);

  std::string actual = fingerprint_hex(sections_fingerprint(sections));
  if (actual != stored_fp)
    throw FingerprintError("model file fingerprint mismatch in " + path + ": stored " +
                           stored_fp + ", computed " + actual);
  file.fingerprint = stored_fp;
  return file;
}

void save_pipeline_model(const std::string& path, MopPipelineModel& model) {
  ModelFile file;
  std::vector<std::string> stages;
  for (const auto& [level, bundle] : model.per_level) {
    std::string stage = "level" + std::to_string(level_number(level));
    stages.push_back(stage);
    put_bundle(file, stage, bundle);
  }
  if (model.joint) {
    stages.push_back("multiscale");
    put_bundle(file, "multiscale", *model.joint);
  }

  json meta{{"format", 1},
            {"grid", grid_to_json(model.grid)},
            {"vlad", vlad_to_json(model.vlad)},
            {"method", pooling_method_name(model.method)},
            {"strategy", strategy_to_json(model.strategy)},
            {"seed", model.seed},
            {"stages", stages}};
  file.json_sections["model"] = meta.dump();
  write_model_file(path, file);
  model.fingerprint = file.fingerprint;
}

MopPipelineModel load_pipeline_model(const std::string& path) {
  ModelFile file = read_model_file(path);
  if (!file.json_sections.count("model"))
    throw std::invalid_argument("not a pipeline model file (no 'model' section): " + path);
  json meta = parse_json_text(file.json_sections.at("model"), "model");

  MopPipelineModel model;
  model.grid = grid_from_json(meta.at("grid"));
  model.vlad = vlad_from_json(meta.at("vlad"));
  model.method = pooling_method_from_name(meta.at("method").get<std::string>());
  model.strategy = strategy_from_json(meta.at("strategy"));
  model.seed = meta.at("seed").get<std::uint64_t>();
  model.fingerprint = file.fingerprint;

  for (const std::string& stage : meta.at("stages").get<std::vector<std::string>>()) {
    if (stage == "multiscale") {
      model.joint = get_bundle(file, stage);
    } else if (stage.rfind("level", 0) == 0 && stage.size() == 6) {
      Level level = level_from_number(stage[5] - '0');
      model.per_level[level] = get_bundle(file, stage);
    } else {
      throw std::invalid_argument("model file: unknown stage name: " + stage);
    }
  }
  return model;
}

void save_feature_set(const std::string& matrix_path, const std::string& sidecar_path,
                      const FeatureSet& set) {
  if (set.image_ids.size() != set.features.rows)
    throw std::invalid_argument("feature set: id count does not match feature rows");
  std::vector<float> values(set.features.data.begin(), set.features.data.end());
  write_mopd(matrix_path, set.features.rows, set.features.cols, values);

  json layout = json::array();
  for (const auto& b : set.layout)
    layout.push_back({{"block", b.block}, {"offset", b.offset}, {"length", b.length}});
  json sidecar{{"fingerprint", set.model_fingerprint},
               {"image_ids", set.image_ids},
               {"dim", set.features.cols},
               {"block_layout", layout}};
  std::ofstream out(sidecar_path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open for writing: " + sidecar_path);
  out << sidecar.dump(2) << "\n";
}

FeatureSet load_feature_set(const std::string& matrix_path, const std::string& sidecar_path) {
  FeatureSet set;
  std::size_t count = 0, dim = 0;
  std::vector<float> values;
  read_mopd(matrix_path, count, dim, values);
  set.features = Matrix(count, dim);
  for (std::size_t i = 0; i < values.size(); ++i)
    set.features.data[i] = static_cast<double>(values[i]);

  std::ifstream in(sidecar_path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + sidecar_path);
  json sidecar = json::parse(in, nullptr, false);
  if (sidecar.is_discarded())
    throw std::invalid_argument("malformed JSON sidecar: " + sidecar_path);
  set.model_fingerprint = sidecar.at("fingerprint").get<std::string>();
  set.image_ids = sidecar.at("image_ids").get<std::vector<std::string>>();
  for (const auto& b : sidecar.at("block_layout"))
    set.layout.push_back({b.at("block").get<std::string>(), b.at("offset").get<std::size_t>(),
                          b.at("length").get<std::size_t>()});
  if (set.image_ids.size() != set.features.rows)
    throw std::invalid_argument("feature sidecar id count does not match matrix rows: " +
                                sidecar_path);
  if (sidecar.at("dim").get<std::size_t>() != set.features.cols)
    throw std::invalid_argument("feature sidecar dim does not match matrix: " + sidecar_path);
  return set;
}

}  // namespace mop
