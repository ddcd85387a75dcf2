#include "hlcm/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hlcm::io {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error(path + ": cannot open");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw data_error(path + ": " + e.what());
  }
}

void dump_json(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != c)
      throw data_error("ragged matrix in JSON input");
    for (int j = 0; j < c; ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

json int_matrix_to_json(const IntMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json hierarchy_to_json(const Hierarchy& h) {
  json edges = json::array();
  for (const auto& [a, b] : h.edges) edges.push_back(json::array({a + 1, b + 1}));
  return json{{"n_attributes", h.n_attributes}, {"edges", std::move(edges)}};
}

Hierarchy hierarchy_from_json(const json& j) {
  Hierarchy h;
  h.n_attributes = j.at("n_attributes").get<int>();
  for (const auto& e : j.at("edges"))
    h.edges.emplace_back(e.at(0).get<int>() - 1, e.at(1).get<int>() - 1);
  return h;
}

json q_to_json(const QMatrix& q) {
  json rows = json::array();
  for (int j = 0; j < q.n_items(); ++j) {
    json row = json::array();
    for (int k = 0; k < q.n_attributes; ++k) row.push_back(q.entry(j, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

QMatrix q_from_json(const json& rows, int n_attributes) {
  QMatrix q;
  q.n_attributes = n_attributes;
  for (const auto& row : rows) {
    Profile p = 0;
    if (static_cast<int>(row.size()) != n_attributes)
      throw data_error("Q row width does not match n_attributes");
    for (int k = 0; k < n_attributes; ++k)
      if (row[static_cast<std::size_t>(k)].get<int>() != 0) p |= Profile{1} << k;
    q.rows.push_back(p);
  }
  return q;
}

json config_to_json(const EmConfig& c) {
  return json{{"m_upper", c.m_upper},
              {"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"tau", c.tau},
              {"gamma", c.gamma},
              {"rho", c.rho},
              {"theta_floor", c.theta_floor},
              {"max_outer_iters", c.max_outer_iters},
              {"outer_tol", c.outer_tol},
              {"inner_gd_iters", c.inner_gd_iters},
              {"inner_gd_step", c.inner_gd_step},
              {"merge_tol", c.merge_tol}};
}

EmConfig config_from_json(const json& j) {
  EmConfig c;
  c.m_upper = j.at("m_upper").get<int>();
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.tau = j.at("tau").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.rho = j.at("rho").get<double>();
  c.theta_floor = j.at("theta_floor").get<double>();
  c.max_outer_iters = j.at("max_outer_iters").get<int>();
  c.outer_tol = j.at("outer_tol").get<double>();
  c.inner_gd_iters = j.at("inner_gd_iters").get<int>();
  c.inner_gd_step = j.at("inner_gd_step").get<double>();
  c.merge_tol = j.at("merge_tol").get<double>();
  return c;
}

}  // namespace

void write_responses_csv(const std::string& path, const ResponseData& data) {
  std::string out;
  const int n = data.n_subjects(), j_total = data.n_items();
  for (int j = 0; j < j_total; ++j) {
    if (j > 0) out += ',';
    out += "item_" + std::to_string(j + 1);
  }
  out += '\n';
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < j_total; ++j) {
      if (j > 0) out += ',';
      if (data.mask && (*data.mask)(i, j) == 0.0)
        out += "NA";
      else
        out += data.values(i, j) != 0.0 ? '1' : '0';
    }
    out += '\n';
  }
  write_text_file(path, out);
}

ResponseData read_responses_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };

  const int j_total = static_cast<int>(split(line).size());
  if (j_total < 1) throw data_error(path + ": header has no columns");

  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> mask;
  bool any_missing = false;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != j_total)
      throw data_error(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(j_total) + " cells, found " +
                       std::to_string(cells.size()));
    std::vector<double> v(static_cast<std::size_t>(j_total));
    std::vector<double> m(static_cast<std::size_t>(j_total), 1.0);
    for (int j = 0; j < j_total; ++j) {
      const std::string& cell = cells[static_cast<std::size_t>(j)];
      if (cell == "NA") {
        v[static_cast<std::size_t>(j)] = 0.0;
        m[static_cast<std::size_t>(j)] = 0.0;
        any_missing = true;
      } else if (cell == "0" || cell == "1") {
        v[static_cast<std::size_t>(j)] = cell == "1" ? 1.0 : 0.0;
      } else {
        throw data_error(path + ":" + std::to_string(line_no) + ": cell '" + cell +
                         "' is not 0, 1 or NA");
      }
    }
    values.push_back(std::move(v));
    mask.push_back(std::move(m));
  }
  if (values.empty()) throw data_error(path + ": no data rows");

  ResponseData data;
  data.values.resize(static_cast<int>(values.size()), j_total);
  for (std::size_t i = 0; i < values.size(); ++i)
    for (int j = 0; j < j_total; ++j)
      data.values(static_cast<int>(i), j) = values[i][static_cast<std::size_t>(j)];
  if (any_missing) {
    data.mask.emplace(static_cast<int>(mask.size()), j_total);
    for (std::size_t i = 0; i < mask.size(); ++i)
      for (int j = 0; j < j_total; ++j)
        (*data.mask)(static_cast<int>(i), j) = mask[i][static_cast<std::size_t>(j)];
  }
  return data;
}

void write_truth_json(const std::string& path, const GroundTruth& truth, const SimSpec& spec) {
  json j;
  j["schema_version"] = schema_version;
  j["spec"] = json{{"model", to_string(spec.model)},
                   {"hierarchy", hierarchy_to_json(spec.hierarchy)},
                   {"n_items", spec.n_items},
                   {"n_subjects", spec.n_subjects},
                   {"theta_high", spec.theta_high},
                   {"theta_low", spec.theta_low},
                   {"seed", spec.seed}};
  j["q"] = q_to_json(truth.q);
  json profiles = json::array();
  for (Profile p : truth.profiles.profiles)
    profiles.push_back(profile_to_string(p, truth.profiles.n_attributes));
  j["profiles"] = std::move(profiles);
  j["proportions"] = vector_to_json(truth.proportions);
  j["theta"] = matrix_to_json(truth.theta);
  json tags = json::array();
  for (ModelType t : truth.item_models) tags.push_back(to_string(t));
  j["item_models"] = std::move(tags);
  json members = json::array();
  for (int m : truth.memberships) members.push_back(m + 1);
  j["memberships"] = std::move(members);
  dump_json(path, j);
}

TruthFile read_truth_json(const std::string& path) {
  const json j = load_json(path);
  try {
    TruthFile out;
    const json& s = j.at("spec");
    out.spec.model = model_type_from_string(s.at("model").get<std::string>());
    out.spec.hierarchy = hierarchy_from_json(s.at("hierarchy"));
    out.spec.n_items = s.at("n_items").get<int>();
    out.spec.n_subjects = s.at("n_subjects").get<int>();
    out.spec.theta_high = s.at("theta_high").get<double>();
    out.spec.theta_low = s.at("theta_low").get<double>();
    out.spec.seed = s.at("seed").get<std::uint64_t>();

    out.truth.hierarchy = out.spec.hierarchy;
    out.truth.profiles.n_attributes = out.spec.hierarchy.n_attributes;
    for (const auto& p : j.at("profiles"))
      out.truth.profiles.profiles.push_back(profile_from_string(p.get<std::string>()));
    out.truth.q = q_from_json(j.at("q"), out.spec.hierarchy.n_attributes);
    out.truth.proportions = vector_from_json(j.at("proportions"));
    out.truth.theta = matrix_from_json(j.at("theta"));
    for (const auto& t : j.at("item_models"))
      out.truth.item_models.push_back(model_type_from_string(t.get<std::string>()));
    for (const auto& m : j.at("memberships"))
      out.truth.memberships.push_back(m.get<int>() - 1);
    return out;
  } catch (const json::exception& e) {
    throw data_error(path + ": " + e.what());
  }
}

void write_fit_json(const std::string& path, const FitResult& fit, const EmConfig& config,
                    double bic_value) {
  json j;
  j["schema_version"] = schema_version;
  j["config"] = config_to_json(config);
  j["pi"] = vector_to_json(fit.params.proportions);
  j["theta"] = matrix_to_json(fit.params.item_params);
  json active = json::array();
  for (auto flag : fit.active) active.push_back(static_cast<int>(flag));
  j["active"] = std::move(active);
  j["m_hat"] = fit.n_selected;
  j["loglik"] = fit.loglik;
  j["bic"] = bic_value;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["objective_trace"] = fit.objective_trace;
  j["warnings"] = fit.warnings;
  dump_json(path, j);
}

FitFile read_fit_json(const std::string& path) {
  const json j = load_json(path);
  try {
    FitFile out;
    out.config = config_from_json(j.at("config"));
    out.fit.params.proportions = vector_from_json(j.at("pi"));
    out.fit.params.item_params = matrix_from_json(j.at("theta"));
    for (const auto& flag : j.at("active"))
      out.fit.active.push_back(static_cast<std::uint8_t>(flag.get<int>()));
    out.fit.n_selected = j.at("m_hat").get<int>();
    out.fit.loglik = j.at("loglik").get<double>();
    out.fit.converged = j.at("converged").get<bool>();
    out.fit.iterations = j.at("iterations").get<int>();
    out.fit.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    out.fit.warnings = j.at("warnings").get<int>();
    out.bic = j.at("bic").get<double>();
    return out;
  } catch (const json::exception& e) {
    throw data_error(path + ": " + e.what());
  }
}

void write_bic_table_csv(const std::string& path, const std::vector<BicRow>& rows) {
  std::string out = "stage,lambda1,lambda2,tau,loglik,m_hat,dim_total,bic\n";
  for (const BicRow& r : rows) {
    out += std::to_string(r.stage);
    out += ',' + format_double(r.lambda1);
    out += ',' + format_double(r.lambda2);
    out += ',' + format_double(r.tau);
    out += ',' + format_double(r.loglik);
    out += ',' + std::to_string(r.m_hat);
    out += ',' + std::to_string(r.dim_total);
    out += ',' + format_double(r.bic);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_recovery_json(const std::string& path, const RecoveryResult& result, double rho,
                         double eps_gamma, double t) {
  json j;
  j["schema_version"] = schema_version;
  j["config"] = json{{"rho", rho}, {"eps_gamma", eps_gamma}, {"t", t}};
  j["gamma"] = int_matrix_to_json(result.gamma);
  j["partial_order"] = int_matrix_to_json(result.dag.adjacency);
  json members = json::array();
  for (const auto& node : result.dag.members) {
    json arr = json::array();
    for (int c : node) arr.push_back(c + 1);
    members.push_back(std::move(arr));
  }
  j["node_members"] = std::move(members);
  json profiles = json::array();
  for (Profile p : result.profiles.profiles)
    profiles.push_back(profile_to_string(p, result.profiles.n_attributes));
  j["profiles"] = std::move(profiles);
  json class_to_node = json::array();
  for (int node : result.class_to_node) class_to_node.push_back(node + 1);
  j["class_to_node"] = std::move(class_to_node);
  j["hierarchy"] = hierarchy_to_json(result.hierarchy);
  j["q"] = q_to_json(result.q);
  j["k_hat"] = result.k_hat;
  json active = json::array();
  for (int k : result.active) active.push_back(k + 1);
  j["active_classes"] = std::move(active);
  j["warnings"] = result.warnings;
  j["degenerate"] = result.degenerate;
  dump_json(path, j);
}

void write_metrics_json(const std::string& path, const Metrics& metrics) {
  json j;
  j["schema_version"] = schema_version;
  j["acc_m"] = metrics.acc_m;
  j["acc_p"] = metrics.acc_p;
  j["acc_e"] = metrics.acc_e;
  j["mse_theta"] = metrics.mse_theta ? json(*metrics.mse_theta) : json(nullptr);
  j["acc_q"] = metrics.acc_q ? json(*metrics.acc_q) : json(nullptr);
  dump_json(path, j);
}

void write_hierarchy_dot(const std::string& path, const Hierarchy& hierarchy) {
  std::string out = "digraph hierarchy {\n  rankdir=TB;\n";
  for (int k = 0; k < hierarchy.n_attributes; ++k)
    out += "  a" + std::to_string(k + 1) + ";\n";
  for (const auto& [a, b] : hierarchy.edges)
    out += "  a" + std::to_string(a + 1) + " -> a" + std::to_string(b + 1) + ";\n";
  out += "}\n";
  write_text_file(path, out);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error(path + ": cannot open for writing");
  out << content;
  if (!out) throw data_error(path + ": write failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hlcm::io
