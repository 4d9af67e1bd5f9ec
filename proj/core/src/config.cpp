#include "reschunk/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "reschunk/errors.hpp"

namespace reschunk {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream out;
  for (size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto& m = cfg.model;
  auto& o = cfg.opt;
  if (key == "J") m.J = parse_int(key, value);
  else if (key == "D") m.D = parse_int(key, value);
  else if (key == "T") m.T = parse_int(key, value);
  else if (key == "p") m.p = parse_int(key, value);
  else if (key == "n_chunks") m.n_chunks = parse_int(key, value);
  else if (key == "F") m.F = parse_int(key, value);
  else if (key == "tau") m.tau = parse_double(key, value);
  else if (key == "sigma0") m.sigma0 = parse_double(key, value);
  else if (key == "sigma1") m.sigma1 = parse_double(key, value);
  else if (key == "pono_variant") {
    if (value == "standard") m.pono_variant = PonoVariant::standard;
    else if (value == "as_printed") m.pono_variant = PonoVariant::as_printed;
    else throw ConfigError("pono_variant: expected standard or as_printed, got '" + value + "'");
  } else if (key == "grouping_threshold") m.grouping_threshold = parse_double(key, value);
  else if (key == "pono_epsilon") m.pono_epsilon = parse_double(key, value);
  else if (key == "edge_hidden") m.edge_hidden = parse_int(key, value);
  else if (key == "edge_classes") m.edge_classes = parse_int(key, value);
  else if (key == "kl_weight") m.kl_weight = parse_double(key, value);
  else if (key == "coarse_branch") m.coarse_branch = parse_bool(key, value);
  else if (key == "learned_grouping") m.learned_grouping = parse_bool(key, value);
  else if (key == "use_pono") m.use_pono = parse_bool(key, value);
  else if (key == "infer_uniform_prior") m.infer_uniform_prior = parse_bool(key, value);
  else if (key == "fixed_partition") {
    JointPartition part;
    part.group_id = parse_int_list(key, value);
    part.group_count = *std::max_element(part.group_id.begin(), part.group_id.end()) + 1;
    part.validate();
    m.fixed_partition = std::move(part);
  } else if (key == "learning_rate") o.learning_rate = parse_double(key, value);
  else if (key == "weight_decay") o.weight_decay = parse_double(key, value);
  else if (key == "beta1") o.beta1 = parse_double(key, value);
  else if (key == "beta2") o.beta2 = parse_double(key, value);
  else if (key == "batch_size") o.batch_size = parse_int(key, value);
  else if (key == "max_steps") o.max_steps = parse_int(key, value);
  else if (key == "patience") o.patience = parse_int(key, value);
  else if (key == "horizons_ms") cfg.horizons.horizons_ms = parse_int_list(key, value);
  else if (key == "fps") cfg.horizons.fps = parse_double(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    set_config_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

std::string render_config(const RunConfig& cfg) {
  const auto& m = cfg.model;
  const auto& o = cfg.opt;
  std::ostringstream out;
  out << "J = " << m.J << "\n"
      << "D = " << m.D << "\n"
      << "T = " << m.T << "\n"
      << "p = " << m.p << "\n"
      << "n_chunks = " << m.n_chunks << "\n"
      << "F = " << m.F << "\n"
      << "tau = " << fmt(m.tau) << "\n"
      << "sigma0 = " << fmt(m.sigma0) << "\n"
      << "sigma1 = " << fmt(m.sigma1) << "\n"
      << "pono_variant = "
      << (m.pono_variant == PonoVariant::standard ? "standard" : "as_printed") << "\n"
      << "grouping_threshold = " << fmt(m.grouping_threshold) << "\n"
      << "pono_epsilon = " << fmt(m.pono_epsilon) << "\n"
      << "edge_hidden = " << m.edge_hidden << "\n"
      << "edge_classes = " << m.edge_classes << "\n"
      << "kl_weight = " << fmt(m.kl_weight) << "\n"
      << "coarse_branch = " << (m.coarse_branch ? "true" : "false") << "\n"
      << "learned_grouping = " << (m.learned_grouping ? "true" : "false") << "\n"
      << "use_pono = " << (m.use_pono ? "true" : "false") << "\n"
      << "infer_uniform_prior = " << (m.infer_uniform_prior ? "true" : "false") << "\n";
  if (m.fixed_partition) out << "fixed_partition = " << join_ints(m.fixed_partition->group_id) << "\n";
  out << "learning_rate = " << fmt(o.learning_rate) << "\n"
      << "weight_decay = " << fmt(o.weight_decay) << "\n"
      << "beta1 = " << fmt(o.beta1) << "\n"
      << "beta2 = " << fmt(o.beta2) << "\n"
      << "batch_size = " << o.batch_size << "\n"
      << "max_steps = " << o.max_steps << "\n"
      << "patience = " << o.patience << "\n"
      << "horizons_ms = " << join_ints(cfg.horizons.horizons_ms) << "\n"
      << "fps = " << fmt(cfg.horizons.fps) << "\n";
  return out.str();
}

}  // namespace reschunk
