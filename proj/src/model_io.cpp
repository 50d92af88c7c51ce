#include "copresence/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace copresence {

using nlohmann::json;

namespace {

json node_to_json(const std::vector<TreeNode>& nodes, std::size_t i) {
  const auto& n = nodes[i];
  json j{{"p_co", n.p_co}, {"samples", n.samples}};
  if (!n.is_leaf()) {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(nodes, static_cast<std::size_t>(n.left));
    j["right"] = node_to_json(nodes, static_cast<std::size_t>(n.right));
  }
  return j;
}

// Rebuilds the preorder node array the grower produces.
int node_from_json(const json& j, std::vector<TreeNode>& nodes, std::size_t n_features, int depth) {
  if (depth > 4096) throw Error(Errc::ParseError, "tree nesting too deep");
  const int idx = static_cast<int>(nodes.size());
  TreeNode node;
  node.p_co = j.at("p_co").get<double>();
  node.samples = j.at("samples").get<std::uint32_t>();
  if (!(node.p_co >= 0.0 && node.p_co <= 1.0)) throw Error(Errc::ParseError, "leaf posterior outside [0, 1]");
  nodes.push_back(node);
  if (j.contains("feature")) {
    const int f = j.at("feature").get<int>();
    if (f < 0 || static_cast<std::size_t>(f) >= n_features)
      throw Error(Errc::ParseError, "split feature " + std::to_string(f) + " out of range");
    if (!j.contains("left") || !j.contains("right"))
      throw Error(Errc::ParseError, "internal node without two children");
    const double thr = j.at("threshold").get<double>();
    const int l = node_from_json(j.at("left"), nodes, n_features, depth + 1);
    const int r = node_from_json(j.at("right"), nodes, n_features, depth + 1);
    auto& self = nodes[static_cast<std::size_t>(idx)];
    self.feature = f;
    self.threshold = thr;
    self.left = l;
    self.right = r;
  }
  return idx;
}

const char* criterion_name(SplitCriterion c) { return c == SplitCriterion::Gini ? "gini" : "entropy"; }

}  // namespace

std::string model_to_json(const ForestModel& model) {
  json trees = json::array();
  for (const auto& t : model.trees) trees.push_back(t.nodes().empty() ? json::object() : node_to_json(t.nodes(), 0));
  const auto& p = model.params;
  json params{{"n_trees", p.n_trees},
              {"bootstrap", p.bootstrap},
              {"seed", p.seed},
              {"max_depth", p.tree.max_depth},
              {"min_leaf", p.tree.min_leaf},
              {"criterion", criterion_name(p.tree.criterion)}};
  params["feature_subsample"] = p.feature_subsample ? json(*p.feature_subsample) : json(nullptr);
  json j{{"format", kModelFormat},
         {"kind", to_string(model.kind)},
         {"schema_id", model.schema_id},
         {"n_features", model.n_features},
         {"params", params},
         {"trees", trees}};
  return j.dump();
}

ForestModel model_from_json(const std::string& text) {
  try {
    auto j = json::parse(text);
    if (j.at("format").get<std::string>() != kModelFormat)
      throw Error(Errc::ParseError, "unsupported model format '" + j.at("format").get<std::string>() + "'");
    ForestModel m;
    m.kind = parse_classifier(j.at("kind").get<std::string>());
    m.schema_id = j.at("schema_id").get<std::string>();
    m.n_features = j.at("n_features").get<std::size_t>();
    const auto& p = j.at("params");
    m.params.n_trees = p.at("n_trees").get<int>();
    m.params.bootstrap = p.at("bootstrap").get<bool>();
    m.params.seed = p.at("seed").get<std::uint64_t>();
    m.params.tree.max_depth = p.at("max_depth").get<int>();
    m.params.tree.min_leaf = p.at("min_leaf").get<int>();
    const auto crit = p.at("criterion").get<std::string>();
    if (crit == "gini") m.params.tree.criterion = SplitCriterion::Gini;
    else if (crit == "entropy") m.params.tree.criterion = SplitCriterion::Entropy;
    else throw Error(Errc::ParseError, "unknown split criterion '" + crit + "'");
    if (!p.at("feature_subsample").is_null()) m.params.feature_subsample = p.at("feature_subsample").get<double>();
    for (const auto& t : j.at("trees")) {
      std::vector<TreeNode> nodes;
      if (!t.empty()) node_from_json(t, nodes, m.n_features, 0);
      m.trees.emplace_back(std::move(nodes), m.n_features);
    }
    if (m.trees.empty()) throw Error(Errc::ParseError, "model has no trees");
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("model JSON: ") + e.what());
  }
}

std::filesystem::path schema_path_for(const std::filesystem::path& model_path) {
  auto p = model_path;
  p.replace_extension(".schema.json");
  return p;
}

void save_model(const std::filesystem::path& path, const ForestModel& model, const FeatureSchema& schema) {
  if (schema.id() != model.schema_id)
    throw Error(Errc::SchemaMismatch, "model " + model.schema_id + " saved with schema " + schema.id());
  write_text_file(path, model_to_json(model));
  write_text_file(schema_path_for(path), schema.to_json());
}

ForestModel load_model(const std::filesystem::path& path) {
  auto m = model_from_json(read_text_file(path));
  const auto sp = schema_path_for(path);
  if (std::filesystem::exists(sp)) {
    auto schema = FeatureSchema::from_json(read_text_file(sp));
    if (schema.id() != m.schema_id || schema.size() != m.n_features)
      throw Error(Errc::SchemaMismatch, "model " + m.schema_id + " next to schema " + schema.id());
  }
  return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(Errc::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoError, "rename " + tmp.string() + ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace copresence
