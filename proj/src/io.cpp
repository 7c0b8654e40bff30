#include "wml/io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace wml::io {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

TreeSpec parse_node(const json& j, double default_mass, int depth) {
  if (depth > 64) throw ValidationError("tree json: nesting too deep");
  if (!j.is_object()) throw ValidationError("tree json: node must be an object");
  TreeSpec t;
  t.mass = default_mass;
  if (j.contains("mass")) {
    if (!j["mass"].is_number()) throw ValidationError("tree json: mass must be a number");
    t.mass = j["mass"].get<double>();
  }
  if (j.contains("children")) {
    if (!j["children"].is_array()) throw ValidationError("tree json: children must be an array");
    for (const json& c : j["children"]) {
      if (!c.contains("mass")) throw ValidationError("tree json: child without mass");
      t.children.push_back(parse_node(c, 0.0, depth + 1));
    }
  }
  return t;
}

json node_json(const TreeSpec& t) {
  json j;
  j["mass"] = t.mass;
  if (!t.children.empty()) {
    j["children"] = json::array();
    for (const TreeSpec& c : t.children) j["children"].push_back(node_json(c));
  }
  return j;
}

std::vector<std::vector<double>> parse_rows(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::logic_error&) {
        throw ValidationError("csv: malformed number '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos)
        throw ValidationError("csv: malformed number '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ValidationError("csv: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("csv: no rows");
  return rows;
}

json mats_json(const std::vector<std::vector<Mat>>& levels) {
  json out = json::array();
  for (const auto& level : levels) {
    json lj = json::array();
    for (const Mat& m : level) {
      json mj = json::array();
      for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        mj.push_back(row);
      }
      lj.push_back(mj);
    }
    out.push_back(lj);
  }
  return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

TreeSpec tree_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("tree json: ") + e.what());
  }
  return parse_node(j, 1.0, 0);
}

std::string tree_to_json(const TreeSpec& tree) { return node_json(tree).dump(1) + "\n"; }

MatrixWeight weight_from_csv(const std::string& text) {
  const auto rows = parse_rows(text);
  const size_t cols = rows.front().size();
  int d = 0;
  while (static_cast<size_t>(d * d) < cols) ++d;
  if (static_cast<size_t>(d * d) != cols || d > kMaxDim) throw ValidationError("weight csv: column count must be d*d");
  std::vector<Mat> leaves;
  leaves.reserve(rows.size());
  for (const auto& r : rows) {
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) m(i, k) = r[static_cast<size_t>(i * d + k)];
    leaves.push_back(m);
  }
  return MatrixWeight(d, std::move(leaves));
}

std::string weight_to_csv(const MatrixWeight& w) {
  std::string out;
  for (int l = 0; l < w.size(); ++l) {
    const Mat& m = w.at(l);
    for (int i = 0; i < w.dim(); ++i)
      for (int k = 0; k < w.dim(); ++k) {
        if (i || k) out += ',';
        out += fmt(m(i, k));
      }
    out += '\n';
  }
  return out;
}

LeafFunction function_from_csv(const std::string& text) {
  const auto rows = parse_rows(text);
  LeafFunction f = LeafFunction::zeros(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()));
  for (size_t l = 0; l < rows.size(); ++l)
    for (size_t i = 0; i < rows[l].size(); ++i) {
      if (!std::isfinite(rows[l][i])) throw ValidationError("function csv: non-finite value");
      f.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = rows[l][i];
    }
  return f;
}

std::string function_to_csv(const LeafFunction& f) {
  std::string out;
  for (int l = 0; l < f.size(); ++l) {
    for (int i = 0; i < f.dim(); ++i) {
      if (i) out += ',';
      out += fmt(f.values(i, l));
    }
    out += '\n';
  }
  return out;
}

std::string reducers_to_json(const ReducingPair& pair) {
  std::vector<std::vector<Mat>> tilde, hat;
  for (int n = 0; n <= pair.depth(); ++n) {
    tilde.push_back(pair.tilde_level(n));
    hat.push_back(pair.hat_level(n));
  }
  json j;
  j["p"] = pair.p();
  j["tol"] = pair.tol();
  j["tilde"] = mats_json(tilde);
  j["hat"] = mats_json(hat);
  return j.dump() + "\n";
}

std::string family_to_json(const PrincipalFamily& family) {
  json j;
  j["cgamma"] = family.cgamma;
  j["convention"] = family.convention == DiffConvention::kFoldMean ? "fold_mean" : "centered";
  j["sets"] = json::array();
  for (const PrincipalSet& s : family.sets) {
    json sj;
    sj["generation"] = s.generation;
    sj["kappa1"] = s.kappa1;
    sj["kappa2"] = s.kappa2;
    sj["parent"] = s.parent;
    sj["atoms"] = s.atoms;
    sj["escape"] = s.escape;
    j["sets"].push_back(std::move(sj));
  }
  return j.dump(1) + "\n";
}

std::string fit_to_json(const FitResult& fit) {
  json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["stderr"] = fit.std_err;
  j["n"] = fit.n;
  return j.dump(1) + "\n";
}

}  // namespace wml::io
