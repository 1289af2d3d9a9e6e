#include "curio/baseline.hpp"

#include <algorithm>
#include <fstream>

#include "curio/embedded_data.hpp"
#include "curio/errors.hpp"
#include "curio/hashing.hpp"

namespace curio::baseline {

namespace {

psy::SdKind sd_kind_from(const std::string& s) {
  if (s == "sample") return psy::SdKind::Sample;
  if (s == "population") return psy::SdKind::Population;
  throw ConfigError("sd_kind must be sample or population, got '" + s + "'");
}

std::optional<double> optional_number(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

HumanBaseline HumanBaseline::from_json(const Json& j) {
  static const std::vector<std::string> known = {"id",           "provenance",        "questionnaire",
                                                 "omega",        "letters_peek_rate", "thrill_normalized",
                                                 "social_questions", "reference_models"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown baseline key '" + key + "'");
    }
  }
  HumanBaseline b;
  b.id = j.value("id", "");
  b.provenance = j.value("provenance", "");
  if (b.id.empty()) throw ConfigError("baseline needs an id");
  if (j.contains("questionnaire")) {
    const auto& q = j.at("questionnaire");
    const auto n = q.at("n").get<std::size_t>();
    const auto kind = sd_kind_from(q.value("sd_kind", "sample"));
    for (const auto& [code, st] : q.at("stats").items()) {
      psy::SampleStats s;
      s.n = n;
      s.mean = st.at("mean").get<double>();
      s.sd = st.at("sd").get<double>();
      s.sd_kind = kind;
      b.questionnaire[scale::subdimension_from_code(code)] = s;
    }
  }
  if (j.contains("omega")) {
    for (const auto& [code, v] : j.at("omega").items()) {
      b.omega[scale::subdimension_from_code(code)] = v.get<double>();
    }
  }
  b.letters_peek_rate = optional_number(j, "letters_peek_rate");
  b.thrill_normalized = optional_number(j, "thrill_normalized");
  b.social_questions = optional_number(j, "social_questions");
  if (j.contains("reference_models")) b.reference_models = j.at("reference_models");
  return b;
}

Json HumanBaseline::to_json() const {
  Json j;
  j["id"] = id;
  j["provenance"] = provenance;
  if (!questionnaire.empty()) {
    const auto& first = questionnaire.begin()->second;
    Json stats = Json::object();
    for (const auto& [s, st] : questionnaire) stats[scale::code(s)] = {{"mean", st.mean}, {"sd", st.sd}};
    j["questionnaire"] = {{"n", first.n},
                          {"sd_kind", first.sd_kind == psy::SdKind::Sample ? "sample" : "population"},
                          {"stats", stats}};
  }
  Json om = Json::object();
  for (const auto& [s, v] : omega) om[scale::code(s)] = v;
  j["omega"] = om;
  j["letters_peek_rate"] = letters_peek_rate ? Json(*letters_peek_rate) : Json(nullptr);
  j["thrill_normalized"] = thrill_normalized ? Json(*thrill_normalized) : Json(nullptr);
  j["social_questions"] = social_questions ? Json(*social_questions) : Json(nullptr);
  j["reference_models"] = reference_models;
  return j;
}

std::string HumanBaseline::fingerprint() const { return sha256_hex(to_json().dump()); }

const HumanBaseline& builtin() {
  static const HumanBaseline b = HumanBaseline::from_json(Json::parse(embedded::k_human_baseline));
  return b;
}

HumanBaseline load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open baseline file " + path);
  try {
    return HumanBaseline::from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw ConfigError("baseline file " + path + ": " + e.what());
  }
}

HumanBaseline with_override(const HumanBaseline& base, const Json& patch, const std::string& new_id) {
  if (new_id.empty() || new_id == base.id) {
    throw ConfigError("a baseline override needs a new id distinct from '" + base.id + "'");
  }
  Json merged = base.to_json();
  merged.merge_patch(patch);
  merged["id"] = new_id;
  merged["provenance"] = "override of " + base.id + " (" + base.fingerprint().substr(0, 12) +
                         "): " + patch.dump();
  return HumanBaseline::from_json(merged);
}

Registry::Registry() { add(builtin()); }

const HumanBaseline& Registry::get(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw ConfigError("unknown baseline '" + id + "'");
  return *it->second;
}

std::vector<std::string> Registry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, e] : entries_) out.push_back(id);
  return out;
}

const HumanBaseline& Registry::add(HumanBaseline entry) {
  if (entries_.count(entry.id)) throw ConfigError("baseline '" + entry.id + "' is already registered");
  auto ptr = std::make_shared<const HumanBaseline>(std::move(entry));
  entries_[ptr->id] = ptr;
  return *ptr;
}

}  // namespace curio::baseline
