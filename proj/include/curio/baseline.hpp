#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "curio/backend.hpp"
#include "curio/psychometrics.hpp"
#include "curio/scale.hpp"

namespace curio::baseline {

// Published reference values for the human sample plus reference model rows.
// Instances are immutable once registered; overrides produce new entries.
struct HumanBaseline {
  std::string id;
  std::string provenance;
  std::map<scale::Subdimension, psy::SampleStats> questionnaire;
  std::map<scale::Subdimension, double> omega;
  std::optional<double> letters_peek_rate;
  std::optional<double> thrill_normalized;
  std::optional<double> social_questions;
  // {"questionnaire": {model: {code: [mean, sd]}}, "omega": {...},
  //  "reasoning_accuracy": {model: {benchmark: {mode: pct}}}}
  Json reference_models = Json::object();

  static HumanBaseline from_json(const Json& j);
  Json to_json() const;
  // SHA-256 of the canonical JSON form.
  std::string fingerprint() const;
};

const HumanBaseline& builtin();
HumanBaseline load(const std::string& path);

// Copy of `base` with `patch` merged in (same schema, any subset of keys).
// The copy gets `new_id` and a provenance line naming the base it came from.
HumanBaseline with_override(const HumanBaseline& base, const Json& patch, const std::string& new_id);

class Registry {
 public:
  Registry();  // holds the built-in entry
  const HumanBaseline& get(const std::string& id) const;
  std::vector<std::string> ids() const;
  // Registers a derived entry; an existing id is never replaced.
  const HumanBaseline& add(HumanBaseline entry);

 private:
  std::map<std::string, std::shared_ptr<const HumanBaseline>> entries_;
};

}  // namespace curio::baseline
