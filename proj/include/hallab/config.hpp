#pragma once

#include <map>
#include <string>
#include <vector>

#include "hallab/agents.hpp"
#include "hallab/hindsight.hpp"
#include "hallab/worlds.hpp"

namespace hallab::harness {

enum class Method { halgan, oracle, her, vae_her, rig, vanilla };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Flat dotted-key configuration with every default materialized.  Unknown
// keys are rejected with the full key list in the error message; a bare
// key (e.g. "gamma") resolves when it matches exactly one known suffix.
class ExperimentConfig {
 public:
  static ExperimentConfig defaults(const std::string& profile = "desk");
  // Lines of `key = value`; '#' starts a comment.  An optional `profile`
  // key selects the base defaults before the rest of the file applies.
  static ExperimentConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Writes the fully resolved key set, sorted, one per line.
  void save_resolved(const std::string& path) const;

  static const std::vector<std::string>& known_keys();

  worlds::WorldConfig world() const;
  agents::AgentConfig agent() const;
  hindsight::HindsightConfig hindsight() const;
  Method method() const;
  std::vector<uint64_t> seeds() const;

  // Throws when a method-required artifact path is missing or absent on
  // disk; called before any environment step runs.
  void validate_artifacts() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::string resolve_key(const std::string& key) const;

  std::map<std::string, std::string> kv_;
};

// $HALGAN_LAB_OUT when set, else "runs".
std::string default_out_root();

}  // namespace hallab::harness
