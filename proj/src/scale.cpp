#include "curio/scale.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "curio/embedded_data.hpp"
#include "curio/errors.hpp"
#include "curio/hashing.hpp"
#include "curio/parallel.hpp"
#include "curio/text.hpp"

namespace curio::scale {

namespace {

struct SubdimensionInfo {
  Subdimension s;
  const char* code;
  const char* name;
  Dimension parent;
};

constexpr std::array<SubdimensionInfo, 6> kInfo = {{
    {Subdimension::JE, "JE", "Joyous Exploration", Dimension::InformationSeeking},
    {Subdimension::DS, "DS", "Deprivation Sensitivity", Dimension::InformationSeeking},
    {Subdimension::ST, "ST", "Stress Tolerance", Dimension::InformationSeeking},
    {Subdimension::TS, "TS", "Thrill Seeking", Dimension::ThrillSeeking},
    {Subdimension::OSC, "OSC", "Overt Social Curiosity", Dimension::SocialCuriosity},
    {Subdimension::CSC, "CSC", "Covert Social Curiosity", Dimension::SocialCuriosity},
}};

const SubdimensionInfo& info(Subdimension s) {
  return kInfo[static_cast<std::size_t>(s)];
}

struct LanguageTemplate {
  std::string intro;
  std::array<std::string, 7> anchors;  // anchors[0] labels value 1
  std::string statement_label;
  std::string reask;
};

const std::map<std::string, LanguageTemplate>& templates() {
  static const std::map<std::string, LanguageTemplate> t = {
      {"en",
       {"Below are statements people often use to describe themselves. Please use the scale "
        "below to indicate the degree to which these statements accurately describe you. "
        "There are no right or wrong answers.",
        {"Does not describe me at all", "Barely describes me", "Somewhat describes me",
         "Neutral", "Generally describes me", "Mostly describes me", "Completely describes me"},
        "Statement: ",
        "Please answer with a single number from 1 to 7."}},
  };
  return t;
}

const LanguageTemplate& template_for(const std::string& language) {
  auto it = templates().find(language);
  if (it == templates().end()) {
    throw ConfigError("no questionnaire template for language '" + language + "'");
  }
  return it->second;
}

int number_word(const std::string& w) {
  static const std::map<std::string, int> k = {
      {"zero", 0}, {"one", 1}, {"two", 2},   {"three", 3}, {"four", 4}, {"five", 5},
      {"six", 6},  {"seven", 7}, {"eight", 8}, {"nine", 9},  {"ten", 10}};
  auto it = k.find(w);
  return it == k.end() ? -1 : it->second;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

const char* code(Subdimension s) { return info(s).code; }
const char* full_name(Subdimension s) { return info(s).name; }
Dimension parent(Subdimension s) { return info(s).parent; }

Subdimension subdimension_from_code(std::string_view c) {
  const std::string up = text::to_upper(c);
  for (const auto& i : kInfo) {
    if (up == i.code) return i.s;
  }
  throw ConfigError("unknown subdimension '" + std::string(c) + "'");
}

const char* to_string(Dimension d) {
  switch (d) {
    case Dimension::InformationSeeking: return "InformationSeeking";
    case Dimension::ThrillSeeking: return "ThrillSeeking";
    case Dimension::SocialCuriosity: return "SocialCuriosity";
  }
  return "?";
}

// ---- item bank -------------------------------------------------------------

std::vector<ScaleItem> parse_item_bank(const Json& j) {
  if (!j.is_array()) throw ConfigError("item bank must be a JSON array");
  std::vector<ScaleItem> items;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("id") || !e.contains("subdimension") ||
        !e.contains("statement")) {
      throw ConfigError("item bank entries need id, subdimension and statement");
    }
    ScaleItem item;
    item.id = e.at("id").get<int>();
    item.subdimension = subdimension_from_code(e.at("subdimension").get<std::string>());
    item.statement = e.at("statement").get<std::string>();
    items.push_back(std::move(item));
  }
  validate_item_bank(items);
  return items;
}

std::vector<ScaleItem> default_item_bank() {
  static const std::vector<ScaleItem> bank = parse_item_bank(Json::parse(embedded::k_item_bank));
  return bank;
}

std::vector<ScaleItem> load_item_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open item bank " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("item bank " + path + ": " + e.what());
  }
  return parse_item_bank(j);
}

void validate_item_bank(std::span<const ScaleItem> items) {
  if (items.size() != static_cast<std::size_t>(kItemCount)) {
    throw ConfigError("item bank must hold 24 items, got " + std::to_string(items.size()));
  }
  std::set<int> ids;
  std::map<Subdimension, int> per;
  for (const auto& it : items) {
    if (it.id < 1 || it.id > kItemCount) {
      throw ConfigError("item id out of range: " + std::to_string(it.id));
    }
    if (!ids.insert(it.id).second) throw ConfigError("duplicate item id " + std::to_string(it.id));
    if (text::trim(it.statement).empty()) {
      throw ConfigError("item " + std::to_string(it.id) + " has an empty statement");
    }
    ++per[it.subdimension];
  }
  for (Subdimension s : kSubdimensions) {
    if (per[s] != kItemsPerSubdimension) {
      throw ConfigError(std::string("subdimension ") + code(s) + " needs 4 items, got " +
                        std::to_string(per[s]));
    }
  }
}

// ---- scores & perturbations ------------------------------------------------

LikertScore::LikertScore(int value) : value_(value) {
  if (value < 1 || value > 7) {
    throw PreconditionError("Likert score out of range: " + std::to_string(value));
  }
}

std::string PerturbationSpec::label() const {
  std::string out = scale_order == ScaleOrder::Reversed ? "reversed" : "normal";
  if (synonym_swap) out += "+syn-" + *synonym_swap;
  if (language != "en") out += "+lang-" + language;
  return out;
}

Json PerturbationSpec::to_json() const {
  Json j;
  j["synonym_swap"] = synonym_swap ? Json(*synonym_swap) : Json(nullptr);
  j["scale_order"] = scale_order == ScaleOrder::Reversed ? "reversed" : "normal";
  j["language"] = language;
  return j;
}

PerturbationSpec PerturbationSpec::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("perturbation must be an object");
  PerturbationSpec p;
  for (const auto& [key, value] : j.items()) {
    if (key == "synonym_swap") {
      if (value.is_null() || (value.is_boolean() && !value.get<bool>())) {
        p.synonym_swap.reset();
      } else if (value.is_boolean()) {
        p.synonym_swap = "default";
      } else if (value.is_string()) {
        p.synonym_swap = value.get<std::string>();
        if (*p.synonym_swap == "off") p.synonym_swap.reset();
      } else {
        throw ConfigError("synonym_swap must be off, true or a lexicon id");
      }
    } else if (key == "scale_order") {
      const auto s = value.get<std::string>();
      if (s == "normal") {
        p.scale_order = ScaleOrder::Normal;
      } else if (s == "reversed") {
        p.scale_order = ScaleOrder::Reversed;
      } else {
        throw ConfigError("scale_order must be normal or reversed, got '" + s + "'");
      }
    } else if (key == "language") {
      p.language = value.get<std::string>();
    } else {
      throw ConfigError("unknown perturbation key '" + key + "'");
    }
  }
  return p;
}

LexiconSet parse_lexicons(const Json& j) {
  if (!j.is_object()) throw ConfigError("lexicon file must be an object of tables");
  LexiconSet out;
  for (const auto& [id, table] : j.items()) {
    Lexicon lex;
    for (const auto& [from, to] : table.items()) {
      lex[text::to_lower(from)] = to.get<std::string>();
    }
    out[id] = std::move(lex);
  }
  return out;
}

const LexiconSet& default_lexicons() {
  static const LexiconSet set = parse_lexicons(Json::parse(embedded::k_lexicon));
  return set;
}

std::string apply_synonyms(std::string_view statement, const Lexicon& lexicon) {
  std::string out;
  std::size_t i = 0;
  while (i < statement.size()) {
    if (!is_alpha(statement[i])) {
      out += statement[i++];
      continue;
    }
    std::size_t j = i;
    while (j < statement.size() && is_alpha(statement[j])) ++j;
    std::string word(statement.substr(i, j - i));
    auto it = lexicon.find(text::to_lower(word));
    if (it == lexicon.end()) {
      out += word;
    } else {
      std::string repl = it->second;
      if (std::isupper(static_cast<unsigned char>(word[0])) && !repl.empty()) {
        repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
      }
      out += repl;
    }
    i = j;
  }
  return out;
}

std::string render_item_prompt(const ScaleItem& item, const PerturbationSpec& p,
                               const LexiconSet& lexicons) {
  const auto& t = template_for(p.language);
  std::string statement = item.statement;
  if (p.synonym_swap) {
    auto it = lexicons.find(*p.synonym_swap);
    if (it == lexicons.end()) throw ConfigError("unknown lexicon '" + *p.synonym_swap + "'");
    statement = apply_synonyms(statement, it->second);
  }
  std::ostringstream os;
  os << t.intro << "\n";
  for (int k = 1; k <= 7; ++k) {
    const int label = p.scale_order == ScaleOrder::Reversed ? 7 - k : k - 1;
    os << k << ". " << t.anchors[static_cast<std::size_t>(label)] << "\n";
  }
  os << "\n" << t.statement_label << statement;
  return os.str();
}

std::string reask_prompt(const PerturbationSpec& p) { return template_for(p.language).reask; }

LikertScore parse_likert(std::string_view reply, const PerturbationSpec& p) {
  const std::string s(reply);
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_digit(s[i])) {
      std::size_t j = i;
      while (j < s.size() && is_digit(s[j])) ++j;
      const bool glued = (i > 0 && (is_alpha(s[i - 1]) || s[i - 1] == '.' || s[i - 1] == ',')) ||
                         (j < s.size() && is_alpha(s[j])) ||
                         (j + 1 < s.size() && (s[j] == '.' || s[j] == ',') && is_digit(s[j + 1]));
      if (!glued && j - i <= 2) {
        const int v = std::stoi(s.substr(i, j - i));
        if (v >= 1 && v <= 7) {
          return LikertScore(p.scale_order == ScaleOrder::Reversed ? 8 - v : v);
        }
      }
      i = j;
    } else if (is_alpha(s[i])) {
      std::size_t j = i;
      while (j < s.size() && is_alpha(s[j])) ++j;
      const int v = number_word(text::to_lower(s.substr(i, j - i)));
      if (v >= 1 && v <= 7) {
        return LikertScore(p.scale_order == ScaleOrder::Reversed ? 8 - v : v);
      }
      i = j;
    } else {
      ++i;
    }
  }
  throw UnparseableResponse("no rating between 1 and 7 in reply", s);
}

// ---- administration --------------------------------------------------------

Json CellRecord::to_json() const {
  Json msgs = Json::array();
  for (const auto& m : transcript) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"repetition", repetition}, {"item_id", item_id}, {"seed", seed},
          {"messages", msgs},         {"raw", raw},         {"score", score},
          {"reasked", reasked}};
}

CellRecord CellRecord::from_json(const Json& j) {
  CellRecord c;
  c.repetition = j.at("repetition").get<int>();
  c.item_id = j.at("item_id").get<int>();
  c.seed = j.at("seed").get<std::int64_t>();
  for (const auto& m : j.at("messages")) {
    c.transcript.push_back({role_from_string(m.at("role").get<std::string>()),
                            m.at("content").get<std::string>()});
  }
  c.raw = j.at("raw").get<int>();
  c.score = j.at("score").get<int>();
  c.reasked = j.value("reasked", false);
  return c;
}

int ScaleRun::completed_repetitions() const {
  return static_cast<int>(std::count(completed.begin(), completed.end(), true));
}

std::int64_t repetition_seed(std::uint64_t base, int repetition) {
  return static_cast<std::int64_t>(
      derive_seed(base, {label_hash("questionnaire"), static_cast<std::uint64_t>(repetition)}) &
      0x7fffffffULL);
}

ScaleRun administer_scale(Backend& backend, std::span<const ScaleItem> items,
                          const PerturbationSpec& p, int reps, const AdministerOptions& opts) {
  validate_item_bank(items);
  if (reps < 1) throw PreconditionError("repetitions must be >= 1");
  const LexiconSet& lexicons = opts.lexicons ? *opts.lexicons : default_lexicons();
  // Fail on template problems before any request is sent.
  (void)render_item_prompt(items.front(), p, lexicons);

  const std::size_t n_items = items.size();
  ScaleRun run;
  run.backend_id = backend.id();
  run.perturbation = p;
  run.repetitions = reps;
  run.items.assign(items.begin(), items.end());
  run.matrix.assign(static_cast<std::size_t>(reps), std::vector<std::optional<int>>(n_items));
  run.rep_errors.assign(static_cast<std::size_t>(reps), "");

  std::vector<std::optional<CellRecord>> cells(static_cast<std::size_t>(reps) * n_items);
  std::map<int, std::size_t> index_of;
  for (std::size_t k = 0; k < n_items; ++k) index_of[items[k].id] = k;
  for (const auto& c : opts.completed_cells) {
    auto it = index_of.find(c.item_id);
    if (c.repetition < 0 || c.repetition >= reps || it == index_of.end()) continue;
    cells[static_cast<std::size_t>(c.repetition) * n_items + it->second] = c;
  }

  std::mutex mu;
  std::vector<char> rep_failed(static_cast<std::size_t>(reps), 0);
  std::atomic<bool> stop{false};
  std::exception_ptr unavailable;

  parallel_for(cells.size(), opts.parallelism, [&](std::size_t idx) {
    const int rep = static_cast<int>(idx / n_items);
    const ScaleItem& item = items[idx % n_items];
    if (cells[idx] || stop.load()) return;
    {
      std::lock_guard lock(mu);
      if (rep_failed[static_cast<std::size_t>(rep)]) return;
    }
    CellRecord rec;
    rec.repetition = rep;
    rec.item_id = item.id;
    rec.seed = repetition_seed(opts.seed, rep);
    SamplingParams params = opts.sampling;
    params.seed = rec.seed;
    try {
      rec.transcript.push_back(Message::user(render_item_prompt(item, p, lexicons)));
      rec.transcript.push_back(backend.chat(rec.transcript, params));
      std::optional<LikertScore> score;
      try {
        score = parse_likert(rec.transcript.back().content, p);
      } catch (const UnparseableResponse&) {
        rec.reasked = true;
        rec.transcript.push_back(Message::user(reask_prompt(p)));
        rec.transcript.push_back(backend.chat(rec.transcript, params));
        score = parse_likert(rec.transcript.back().content, p);
      }
      rec.score = score->value();
      rec.raw = p.scale_order == ScaleOrder::Reversed ? 8 - rec.score : rec.score;
    } catch (const BackendUnavailable& e) {
      std::lock_guard lock(mu);
      stop = true;
      if (!unavailable) unavailable = std::current_exception();
      rep_failed[static_cast<std::size_t>(rep)] = 1;
      run.rep_errors[static_cast<std::size_t>(rep)] = e.what();
      return;
    } catch (const Error& e) {
      std::lock_guard lock(mu);
      rep_failed[static_cast<std::size_t>(rep)] = 1;
      if (run.rep_errors[static_cast<std::size_t>(rep)].empty()) {
        run.rep_errors[static_cast<std::size_t>(rep)] =
            "item " + std::to_string(item.id) + ": " + e.what();
      }
      return;
    }
    if (opts.on_cell) opts.on_cell(rec);
    cells[idx] = std::move(rec);
  });

  run.completed.assign(static_cast<std::size_t>(reps), false);
  for (int rep = 0; rep < reps; ++rep) {
    bool complete = !rep_failed[static_cast<std::size_t>(rep)];
    for (std::size_t k = 0; k < n_items; ++k) {
      const auto& c = cells[static_cast<std::size_t>(rep) * n_items + k];
      if (!c) {
        complete = false;
        continue;
      }
      run.cells.push_back(*c);
    }
    if (complete) {
      for (std::size_t k = 0; k < n_items; ++k) {
        run.matrix[static_cast<std::size_t>(rep)][k] =
            cells[static_cast<std::size_t>(rep) * n_items + k]->score;
      }
      run.completed[static_cast<std::size_t>(rep)] = true;
    } else if (run.rep_errors[static_cast<std::size_t>(rep)].empty()) {
      run.rep_errors[static_cast<std::size_t>(rep)] = "not attempted";
    }
  }
  if (unavailable) std::rethrow_exception(unavailable);
  return run;
}

// ---- scoring ---------------------------------------------------------------

std::map<Subdimension, psy::SampleStats> score_dimensions(const ScaleRun& run,
                                                          const ScoreOptions& opts) {
  if (run.partial() && !opts.allow_partial) {
    throw PreconditionError("run is partial (" + std::to_string(run.completed_repetitions()) +
                            " of " + std::to_string(run.repetitions) +
                            " repetitions); pass allow_partial to score it");
  }
  const int used = run.completed_repetitions();
  if (used < 1) throw PreconditionError("run has no completed repetition");

  std::map<Subdimension, psy::SampleStats> out;
  for (Subdimension s : kSubdimensions) {
    std::vector<double> values;
    for (std::size_t rep = 0; rep < run.matrix.size(); ++rep) {
      if (!run.completed[rep]) continue;
      double sum = 0.0;
      int count = 0;
      for (std::size_t k = 0; k < run.items.size(); ++k) {
        if (run.items[k].subdimension != s) continue;
        const double v = *run.matrix[rep][k];
        if (opts.estimator == SdEstimator::ItemScores) values.push_back(v);
        sum += v;
        ++count;
      }
      if (opts.estimator == SdEstimator::RepetitionMeans) values.push_back(sum / count);
    }
    psy::SampleStats st = psy::summarize(values);
    st.n = static_cast<std::size_t>(used);
    out[s] = st;
  }
  return out;
}

Eigen::MatrixXd subdimension_matrix(const ScaleRun& run, Subdimension s) {
  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < run.items.size(); ++k) {
    if (run.items[k].subdimension == s) cols.push_back(k);
  }
  Eigen::MatrixXd m(run.completed_repetitions(), static_cast<Eigen::Index>(cols.size()));
  Eigen::Index row = 0;
  for (std::size_t rep = 0; rep < run.matrix.size(); ++rep) {
    if (!run.completed[rep]) continue;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      m(row, static_cast<Eigen::Index>(c)) = *run.matrix[rep][cols[c]];
    }
    ++row;
  }
  return m;
}

std::string matrix_csv(const ScaleRun& run) {
  std::ostringstream os;
  os << "repetition";
  for (const auto& item : run.items) os << "," << item.id;
  os << "\n";
  for (std::size_t rep = 0; rep < run.matrix.size(); ++rep) {
    os << rep;
    for (const auto& cell : run.matrix[rep]) {
      os << ",";
      if (cell) os << *cell;
    }
    os << "\n";
  }
  return os.str();
}

void read_matrix_csv(ScaleRun& run, const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty matrix CSV");
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : l) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  const auto header = split(line);
  if (header.size() != run.items.size() + 1) throw ConfigError("matrix CSV column count mismatch");
  std::vector<std::size_t> col_to_item;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const int id = std::stoi(header[c]);
    auto it = std::find_if(run.items.begin(), run.items.end(),
                           [&](const ScaleItem& i) { return i.id == id; });
    if (it == run.items.end()) throw ConfigError("matrix CSV has unknown item " + header[c]);
    col_to_item.push_back(static_cast<std::size_t>(it - run.items.begin()));
  }
  run.matrix.clear();
  run.completed.clear();
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto cols = split(line);
    if (cols.size() != header.size()) throw ConfigError("matrix CSV row width mismatch");
    std::vector<std::optional<int>> row(run.items.size());
    bool complete = true;
    for (std::size_t c = 1; c < cols.size(); ++c) {
      if (cols[c].empty()) {
        complete = false;
      } else {
        row[col_to_item[c - 1]] = LikertScore(std::stoi(cols[c])).value();
      }
    }
    run.matrix.push_back(std::move(row));
    run.completed.push_back(complete);
  }
  run.repetitions = static_cast<int>(run.matrix.size());
  run.rep_errors.assign(run.matrix.size(), "");
}

}  // namespace curio::scale
