#include "hallab/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hallab::harness {

std::string method_name(Method m) {
  switch (m) {
    case Method::halgan: return "halgan";
    case Method::oracle: return "oracle";
    case Method::her: return "her";
    case Method::vae_her: return "vae_her";
    case Method::rig: return "rig";
    case Method::vanilla: return "vanilla";
  }
  throw std::logic_error("method_name: bad enum");
}

Method method_from_name(const std::string& name) {
  if (name == "halgan") return Method::halgan;
  if (name == "oracle") return Method::oracle;
  if (name == "her") return Method::her;
  if (name == "vae_her" || name == "vae-her") return Method::vae_her;
  if (name == "rig" || name == "rig-") return Method::rig;
  if (name == "vanilla") return Method::vanilla;
  throw std::invalid_argument("unknown method: " + name);
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

const std::vector<std::pair<std::string, std::string>>& desk_defaults() {
  static const std::vector<std::pair<std::string, std::string>> kv = {
      {"profile", "desk"},
      {"world.task", "navigate"},
      {"world.room_size", "6"},
      {"world.image_size", "32"},
      {"world.max_steps", "200"},
      {"world.action_mode", "discrete"},
      {"world.pos_tol", "0.4"},
      {"world.bearing_tol", "0.3"},
      {"world.movement_penalty", "0.01"},
      {"agent.algorithm", "ddqn"},
      {"agent.gamma", "0.99"},
      {"agent.lr", "1e-3"},
      {"agent.lr_actor", "1e-5"},
      {"agent.lr_critic", "1e-4"},
      {"agent.eps_start", "1.0"},
      {"agent.eps_end", "0.5"},
      {"agent.eps_anneal_steps", "100000"},
      {"agent.target_update_interval", "1000"},
      {"agent.tau", "0.005"},
      {"agent.batch_size", "32"},
      {"agent.noise_scale", "0.3"},
      {"hindsight.p_start", "0.2"},
      {"hindsight.p_end", "0.0"},
      {"hindsight.anneal_span", "100000"},
      {"hindsight.d_max", "16"},
      {"hindsight.success_terminal", "true"},
      {"run.method", "vanilla"},
      {"run.total_steps", "150000"},
      {"run.warmup", "2000"},
      {"run.replay_capacity", "20000"},
      {"run.train_every", "4"},
      {"run.eval_every", "10000"},
      {"run.eval_episodes", "20"},
      {"run.seed", "75839"},
      {"run.seeds", "75839,69045,47040,60489,11798"},
      {"run.out_dir", ""},
      {"paths.gan_checkpoint", ""},
      {"paths.vae_checkpoint", ""},
      {"paths.dataset", ""},
  };
  return kv;
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, _] : desk_defaults()) k.push_back(key);
    return k;
  }();
  return keys;
}

ExperimentConfig ExperimentConfig::defaults(const std::string& profile) {
  ExperimentConfig c;
  for (const auto& [k, v] : desk_defaults()) c.kv_[k] = v;
  if (profile == "desk") return c;
  if (profile != "paper") {
    throw std::invalid_argument("unknown profile: " + profile +
                                " (expected desk or paper)");
  }
  c.kv_["profile"] = "paper";
  c.kv_["world.image_size"] = "64";
  c.kv_["run.total_steps"] = "1000000";
  c.kv_["run.warmup"] = "10000";
  c.kv_["run.replay_capacity"] = "100000";
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config file not found: " + path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string profile = "desk";
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    }
    std::string k = trim(line.substr(0, eq));
    std::string v = trim(line.substr(eq + 1));
    if (k == "profile") {
      profile = v;
    } else {
      pairs.emplace_back(std::move(k), std::move(v));
    }
  }
  ExperimentConfig c = defaults(profile);
  for (const auto& [k, v] : pairs) c.set(k, v);
  return c;
}

std::string ExperimentConfig::resolve_key(const std::string& key) const {
  if (kv_.count(key)) return key;
  // Accept a bare suffix when unambiguous, e.g. "gamma" -> "agent.gamma".
  std::string match;
  int n = 0;
  for (const auto& [k, _] : kv_) {
    const auto dot = k.rfind('.');
    if (dot != std::string::npos && k.substr(dot + 1) == key) {
      match = k;
      ++n;
    }
  }
  if (n == 1) return match;
  std::ostringstream msg;
  msg << (n > 1 ? "ambiguous" : "unknown") << " config key: " << key
      << "\nvalid keys:";
  for (const auto& k : known_keys()) msg << "\n  " << k;
  throw std::invalid_argument(msg.str());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  kv_[resolve_key(key)] = value;
}

bool ExperimentConfig::has(const std::string& key) const {
  return !get(key).empty();
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  return kv_.at(resolve_key(key));
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) {
    throw std::invalid_argument("config key " + key + ": bad number " + v);
  }
  return d;
}

int64_t ExperimentConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  size_t pos = 0;
  const long long i = std::stoll(v, &pos);
  if (pos != v.size()) {
    throw std::invalid_argument("config key " + key + ": bad integer " + v);
  }
  return i;
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key " + key + ": bad boolean " + v);
}

void ExperimentConfig::save_resolved(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
}

worlds::WorldConfig ExperimentConfig::world() const {
  worlds::WorldConfig w;
  w.task = worlds::task_from_name(get("world.task"));
  w.room_size = get_double("world.room_size");
  w.image_size = static_cast<int>(get_int("world.image_size"));
  w.max_episode_steps = static_cast<int>(get_int("world.max_steps"));
  const std::string mode = get("world.action_mode");
  if (mode == "discrete") {
    w.action_mode = worlds::ActionMode::discrete;
  } else if (mode == "continuous") {
    w.action_mode = worlds::ActionMode::continuous;
  } else {
    throw std::invalid_argument("world.action_mode: " + mode);
  }
  w.pos_tol = get_double("world.pos_tol");
  w.bearing_tol = get_double("world.bearing_tol");
  w.movement_penalty = get_double("world.movement_penalty");
  w.seed = static_cast<uint64_t>(get_int("run.seed"));
  return w;
}

agents::AgentConfig ExperimentConfig::agent() const {
  agents::AgentConfig a;
  const std::string algo = get("agent.algorithm");
  if (algo == "ddqn") {
    a.algorithm = agents::Algorithm::ddqn;
  } else if (algo == "ddpg") {
    a.algorithm = agents::Algorithm::ddpg;
  } else {
    throw std::invalid_argument("agent.algorithm: " + algo);
  }
  a.gamma = get_double("agent.gamma");
  a.lr = get_double("agent.lr");
  a.lr_actor = get_double("agent.lr_actor");
  a.lr_critic = get_double("agent.lr_critic");
  a.eps_start = get_double("agent.eps_start");
  a.eps_end = get_double("agent.eps_end");
  a.eps_anneal_steps = get_int("agent.eps_anneal_steps");
  a.target_update_interval =
      static_cast<int>(get_int("agent.target_update_interval"));
  a.tau = get_double("agent.tau");
  a.batch_size = static_cast<int>(get_int("agent.batch_size"));
  a.noise_scale = get_double("agent.noise_scale");
  a.image_size = static_cast<int>(get_int("world.image_size"));
  a.seed = static_cast<uint64_t>(get_int("run.seed"));
  return a;
}

hindsight::HindsightConfig ExperimentConfig::hindsight() const {
  hindsight::HindsightConfig h;
  h.p_start = get_double("hindsight.p_start");
  h.p_end = get_double("hindsight.p_end");
  h.anneal_span = get_int("hindsight.anneal_span");
  h.d_max = static_cast<int>(get_int("hindsight.d_max"));
  h.pos_tol = get_double("world.pos_tol");
  h.yaw_tol = get_double("world.bearing_tol");
  h.success_terminal = get_bool("hindsight.success_terminal");
  return h;
}

Method ExperimentConfig::method() const {
  return method_from_name(get("run.method"));
}

std::vector<uint64_t> ExperimentConfig::seeds() const {
  std::vector<uint64_t> out;
  std::stringstream ss(get("run.seeds"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  if (out.empty()) throw std::invalid_argument("run.seeds: empty list");
  return out;
}

void ExperimentConfig::validate_artifacts() const {
  const Method m = method();
  auto require = [&](const std::string& key) {
    const std::string& p = get(key);
    if (p.empty()) {
      throw std::invalid_argument("method " + method_name(m) + " needs " + key);
    }
    if (!std::filesystem::exists(p)) {
      throw std::invalid_argument(key + " not found: " + p);
    }
  };
  if (m == Method::halgan) require("paths.gan_checkpoint");
  if (m == Method::vae_her || m == Method::rig) require("paths.vae_checkpoint");
  if (m == Method::rig) require("paths.dataset");
}

std::string default_out_root() {
  const char* env = std::getenv("HALGAN_LAB_OUT");
  return (env && *env) ? env : "runs";
}

}  // namespace hallab::harness
