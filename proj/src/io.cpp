#include "stealth/io.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#ifndef STEALTH_VERSION
#define STEALTH_VERSION "unknown"
#endif

namespace stealth {

const char* library_version() { return STEALTH_VERSION; }

const char* reward_model_name(RewardModel model) {
  return model == RewardModel::intended ? "intended" : "executed";
}

namespace {

// Tracks which keys of an object were read so leftovers can be rejected.
class Reader {
 public:
  Reader(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const Json* v = find(key)) out = as_number(*v, child(key));
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const Json* v = find(key)) out = static_cast<Int>(as_unsigned(*v, child(key)));
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    const Json* v = find(key);
    if (!v) return;
    if (!v->is_array()) throw ConfigError(child(key), "expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v->size(); ++i)
      out.push_back(as_number((*v)[i], child(key) + "[" + std::to_string(i) + "]"));
  }

  void matrix(const std::string& key, Eigen::MatrixXd& out) {
    const Json* v = find(key);
    if (!v) return;
    const std::string p = child(key);
    if (!v->is_array() || v->empty()) throw ConfigError(p, "expected a nonempty array of rows");
    const std::size_t rows = v->size();
    const std::size_t cols = (*v)[0].is_array() ? (*v)[0].size() : 0;
    if (cols == 0) throw ConfigError(p + "[0]", "expected a nonempty row");
    out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      const Json& row = (*v)[i];
      const std::string rp = p + "[" + std::to_string(i) + "]";
      if (!row.is_array() || row.size() != cols) throw ConfigError(rp, "rows must all have " + std::to_string(cols) + " entries");
      for (std::size_t j = 0; j < cols; ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            as_number(row[j], rp + "[" + std::to_string(j) + "]");
    }
  }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(child(it.key()), "unknown key");
  }

  static double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path, "expected a finite number");
    return x;
  }

  static std::uint64_t as_unsigned(const Json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() < 0) throw ConfigError(path, "expected a nonnegative integer");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ConfigError(path, "expected a nonnegative integer");
  }

 private:
  const Json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Vector flat_numbers(const Json& v, const std::string& path, std::size_t depth) {
  Vector out;
  std::function<void(const Json&, const std::string&, std::size_t)> walk = [&](const Json& node,
                                                                                 const std::string& p,
                                                                                 std::size_t d) {
    if (d == 0) {
      out.push_back(Reader::as_number(node, p));
      return;
    }
    if (!node.is_array()) throw ConfigError(p, "expected a nested array");
    for (std::size_t i = 0; i < node.size(); ++i) walk(node[i], p + "[" + std::to_string(i) + "]", d - 1);
  };
  walk(v, path, depth);
  return out;
}

}  // namespace

Json mdp_to_json(const TabularMdp& mdp) {
  const std::size_t S = mdp.n_states(), A = mdp.n_actions();
  Json tr = Json::array(), rw = Json::array();
  for (std::size_t s = 0; s < S; ++s) {
    Json per_action = Json::array(), rewards = Json::array();
    for (std::size_t a = 0; a < A; ++a) {
      per_action.push_back(Json(std::vector<double>(mdp.row(s, a).begin(), mdp.row(s, a).end())));
      rewards.push_back(mdp.reward(s, a));
    }
    tr.push_back(per_action);
    rw.push_back(rewards);
  }
  Json doc;
  doc["n_states"] = S;
  doc["n_actions"] = A;
  doc["transition"] = tr;
  doc["reward"] = rw;
  doc["reward_bound"] = mdp.reward_bound();
  doc["initial_dist"] = mdp.initial_dist();
  doc["discount"] = mdp.discount();
  return doc;
}

TabularMdp mdp_from_json(const Json& doc) {
  Reader r(doc, "");
  std::size_t S = 0, A = 0;
  r.integer("n_states", S);
  r.integer("n_actions", A);
  require(S > 0, "n_states", "required and must be positive");
  require(A > 0, "n_actions", "required and must be positive");
  const Json* tr = r.find("transition");
  const Json* rw = r.find("reward");
  const Json* init = r.find("initial_dist");
  require(tr != nullptr, "transition", "required");
  require(rw != nullptr, "reward", "required");
  require(init != nullptr, "initial_dist", "required");
  Vector transition = flat_numbers(*tr, "transition", 3);
  Vector reward = flat_numbers(*rw, "reward", 2);
  Vector initial = flat_numbers(*init, "initial_dist", 1);
  require(transition.size() == S * A * S, "transition", "expected shape [n_states][n_actions][n_states]");
  require(reward.size() == S * A, "reward", "expected shape [n_states][n_actions]");
  double bound = -1.0, discount = 0.0;
  r.number("reward_bound", bound);
  r.number("discount", discount);
  require(r.find("reward_bound") != nullptr, "reward_bound", "required");
  require(r.find("discount") != nullptr, "discount", "required");
  r.finish();
  return TabularMdp(S, A, std::move(transition), std::move(reward), bound, std::move(initial), discount);
}

Json attack_policy_to_json(const AttackPolicy& phi) {
  const std::size_t S = phi.n_states(), A = phi.n_actions();
  Json probs = Json::array();
  for (std::size_t s = 0; s < S; ++s) {
    Json per_action = Json::array();
    for (std::size_t a = 0; a < A; ++a)
      per_action.push_back(Json(std::vector<double>(phi.row(s, a).begin(), phi.row(s, a).end())));
    probs.push_back(per_action);
  }
  Json doc;
  doc["n_states"] = S;
  doc["n_actions"] = A;
  doc["probs"] = probs;
  return doc;
}

AttackPolicy attack_policy_from_json(const Json& doc) {
  Reader r(doc, "");
  std::size_t S = 0, A = 0;
  r.integer("n_states", S);
  r.integer("n_actions", A);
  require(S > 0, "n_states", "required and must be positive");
  require(A > 0, "n_actions", "required and must be positive");
  const Json* probs = r.find("probs");
  require(probs != nullptr, "probs", "required");
  Vector p = flat_numbers(*probs, "probs", 3);
  require(p.size() == S * A * A, "probs", "expected shape [n_states][n_actions][n_actions]");
  r.finish();
  return AttackPolicy(S, A, std::move(p));
}

Vector load_distance_csv(const std::filesystem::path& path, std::size_t n_actions) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open distance file " + path.string());
  Vector d;
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        d.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw InvalidInput(path.string() + ": row " + std::to_string(rows + 1) + " has a non-numeric entry");
      }
      ++cols;
    }
    if (cols != n_actions)
      throw InvalidInput(path.string() + ": row " + std::to_string(rows + 1) + " has " + std::to_string(cols) +
                         " entries, expected " + std::to_string(n_actions));
    ++rows;
  }
  if (rows != n_actions) throw InvalidInput(path.string() + ": expected " + std::to_string(n_actions) + " rows");
  return d;
}

LinearSystem ExperimentConfig::linear_system() const {
  if (linear.a.size() == 0) return example_system();
  return LinearSystem(linear.a, linear.b, linear.k, linear.sigma);
}

ExperimentConfig parse_config(const Json& doc) {
  ExperimentConfig cfg;
  Reader root(doc, "");
  if (const Json* e = root.find("experiment")) {
    require(e->is_string(), "experiment", "expected a string");
    cfg.experiment = e->get<std::string>();
    const auto& names = experiment_names();
    require(std::find(names.begin(), names.end(), cfg.experiment) != names.end(), "experiment",
            "unknown experiment '" + cfg.experiment + "'");
  }
  root.integer("seed", cfg.seed);
  root.integer("trials", cfg.trials);
  root.integer("threads", cfg.threads);
  require(cfg.trials >= 1, "trials", "must be >= 1");

  if (const Json* v = root.find("inventory")) {
    Reader r(*v, "inventory");
    r.integer("capacity", cfg.inventory.capacity);
    r.number("fixed_order_cost", cfg.inventory.fixed_order_cost);
    r.number("unit_cost", cfg.inventory.unit_cost);
    r.number("holding_cost", cfg.inventory.holding_cost);
    r.number("unit_price", cfg.inventory.unit_price);
    r.number("demand_rate", cfg.inventory.demand_rate);
    r.number("discount", cfg.inventory.discount);
    r.finish();
    try {
      validate(cfg.inventory);
    } catch (const InvalidInput& e) {
      throw ConfigError("inventory", e.what());
    }
  }
  if (const Json* v = root.find("attack")) {
    Reader r(*v, "attack");
    auto& a = cfg.attack;
    r.number("attack_discount", a.attack_discount);
    require(a.attack_discount > 0.0 && a.attack_discount < 1.0, "attack.attack_discount", "must lie in (0,1)");
    if (const Json* m = r.find("reward_model")) {
      require(m->is_string(), "attack.reward_model", "expected \"intended\" or \"executed\"");
      const std::string s = m->get<std::string>();
      require(s == "intended" || s == "executed", "attack.reward_model", "expected \"intended\" or \"executed\"");
      a.reward_model = s == "intended" ? RewardModel::intended : RewardModel::executed;
    }
    r.numbers("constrained_epsilons", a.constrained_epsilons);
    r.numbers("lp_epsilons", a.lp_epsilons);
    r.numbers("penalties", a.penalties);
    r.number("constrained_epsilon", a.constrained_epsilon);
    r.number("lp_epsilon", a.lp_epsilon);
    r.number("penalty", a.penalty);
    r.finish();
    for (double e : a.constrained_epsilons) require(e >= 0.0, "attack.constrained_epsilons", "entries must be >= 0");
    for (double e : a.lp_epsilons) require(e >= 0.0, "attack.lp_epsilons", "entries must be >= 0");
    for (double b : a.penalties) require(b >= 0.0, "attack.penalties", "entries must be >= 0");
    require(a.constrained_epsilon >= 0.0, "attack.constrained_epsilon", "must be >= 0");
    require(a.lp_epsilon >= 0.0, "attack.lp_epsilon", "must be >= 0");
    require(a.penalty >= 0.0, "attack.penalty", "must be >= 0");
  }
  if (const Json* v = root.find("detector")) {
    Reader r(*v, "detector");
    auto& d = cfg.detector;
    r.number("delta", d.delta);
    r.integer("horizon", d.horizon);
    r.integer("change_time", d.change_time);
    r.integer("max_steps", d.max_steps);
    r.integer("trace_length", d.trace_length);
    r.finish();
    require(d.delta > 0.0 && d.delta < 1.0, "detector.delta", "must lie in (0,1)");
    require(d.horizon >= 1, "detector.horizon", "must be >= 1");
    require(d.max_steps >= 1, "detector.max_steps", "must be >= 1");
  }
  if (const Json* v = root.find("sweep")) {
    Reader r(*v, "sweep");
    r.numbers("epsilons", cfg.sweep.epsilons);
    r.numbers("attack_discounts", cfg.sweep.attack_discounts);
    r.finish();
    for (double e : cfg.sweep.epsilons) require(e >= 0.0, "sweep.epsilons", "entries must be >= 0");
    for (double g : cfg.sweep.attack_discounts)
      require(g > 0.0 && g < 1.0, "sweep.attack_discounts", "entries must lie in (0,1)");
  }
  if (const Json* v = root.find("linear")) {
    Reader r(*v, "linear");
    auto& l = cfg.linear;
    r.matrix("a", l.a);
    r.matrix("b", l.b);
    r.matrix("k", l.k);
    r.matrix("sigma", l.sigma);
    r.numbers("betas", l.betas);
    r.integer("horizon", l.horizon);
    r.integer("change_time", l.change_time);
    r.integer("value_horizon", l.value_horizon);
    r.number("frontier_tol", l.frontier_tol);
    r.finish();
    const bool any = l.a.size() || l.b.size() || l.k.size() || l.sigma.size();
    const bool all = l.a.size() && l.b.size() && l.k.size() && l.sigma.size();
    require(!any || all, "linear", "a, b, k and sigma must be given together");
    if (all) {
      try {
        (void)cfg.linear_system();
      } catch (const InvalidInput& e) {
        throw ConfigError("linear", e.what());
      }
    }
    for (double b : l.betas) require(b > 0.0, "linear.betas", "entries must be positive");
    require(l.horizon >= 1, "linear.horizon", "must be >= 1");
    require(l.value_horizon >= 1, "linear.value_horizon", "must be >= 1");
    require(l.frontier_tol > 0.0, "linear.frontier_tol", "must be positive");
  }
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json doc;
  doc["experiment"] = cfg.experiment;
  doc["seed"] = cfg.seed;
  doc["trials"] = cfg.trials;
  doc["inventory"] = {{"capacity", cfg.inventory.capacity},
                      {"fixed_order_cost", cfg.inventory.fixed_order_cost},
                      {"unit_cost", cfg.inventory.unit_cost},
                      {"holding_cost", cfg.inventory.holding_cost},
                      {"unit_price", cfg.inventory.unit_price},
                      {"demand_rate", cfg.inventory.demand_rate},
                      {"discount", cfg.inventory.discount}};
  doc["attack"] = {{"attack_discount", cfg.attack.attack_discount},
                   {"reward_model", reward_model_name(cfg.attack.reward_model)},
                   {"constrained_epsilons", cfg.attack.constrained_epsilons},
                   {"lp_epsilons", cfg.attack.lp_epsilons},
                   {"penalties", cfg.attack.penalties},
                   {"constrained_epsilon", cfg.attack.constrained_epsilon},
                   {"lp_epsilon", cfg.attack.lp_epsilon},
                   {"penalty", cfg.attack.penalty}};
  doc["detector"] = {{"delta", cfg.detector.delta},
                     {"horizon", cfg.detector.horizon},
                     {"change_time", cfg.detector.change_time},
                     {"max_steps", cfg.detector.max_steps},
                     {"trace_length", cfg.detector.trace_length}};
  doc["sweep"] = {{"epsilons", cfg.sweep.epsilons}, {"attack_discounts", cfg.sweep.attack_discounts}};
  const LinearSystem sys = cfg.linear_system();
  doc["linear"] = {{"a", matrix_json(sys.a())},
                   {"b", matrix_json(sys.b())},
                   {"k", matrix_json(sys.k())},
                   {"sigma", matrix_json(sys.sigma())},
                   {"betas", cfg.linear.betas},
                   {"horizon", cfg.linear.horizon},
                   {"change_time", cfg.linear.change_time},
                   {"value_horizon", cfg.linear.value_horizon},
                   {"frontier_tol", cfg.linear.frontier_tol}};
  return doc;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canonical = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace stealth
