#include "dcmn/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

namespace dcmn {

using nlohmann::json;

std::size_t Example::passage_length() const {
  std::size_t n = 0;
  for (const auto& s : passage_sentences) n += s.size();
  return n;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

void validate(const Example& ex) {
  const std::string who = "example '" + ex.id + "': ";
  if (ex.passage_sentences.empty()) throw DataError(who + "passage has no sentences");
  if (ex.options.size() < 2) throw DataError(who + "needs at least 2 options");
  if (ex.label >= ex.options.size())
    throw DataError(who + "label " + std::to_string(ex.label) + " out of range for " +
                    std::to_string(ex.options.size()) + " options");
  if (ex.question.empty()) throw DataError(who + "empty question");
  for (const auto& s : ex.passage_sentences)
    if (s.empty()) throw DataError(who + "empty passage sentence");
  for (const auto& o : ex.options)
    if (o.empty()) throw DataError(who + "empty option");
  for (auto e : ex.evidence)
    if (e >= ex.passage_sentences.size())
      throw DataError(who + "evidence index " + std::to_string(e) + " out of range");
}

Example truncate(Example ex, const LoadOptions& opts) {
  auto cut = [&](Tokens& t) {
    if (t.size() > opts.max_query_len) t.resize(opts.max_query_len);
  };
  cut(ex.question);
  std::size_t longest = 0;
  for (auto& o : ex.options) {
    cut(o);
    longest = std::max(longest, o.size());
  }
  const std::size_t reserved = ex.question.size() + longest;
  if (reserved >= opts.max_seq_len)
    throw DataError("example '" + ex.id + "': question and options leave no room for the passage");
  const std::size_t budget = opts.max_seq_len - reserved;
  std::size_t excess = ex.passage_length() > budget ? ex.passage_length() - budget : 0;
  while (excess > 0 && !ex.passage_sentences.empty()) {
    Tokens& last = ex.passage_sentences.back();
    const std::size_t take = std::min(excess, last.size());
    last.resize(last.size() - take);
    excess -= take;
    if (last.empty()) ex.passage_sentences.pop_back();
  }
  const std::size_t n = ex.passage_sentences.size();
  std::erase_if(ex.evidence, [n](std::size_t e) { return e >= n; });
  return ex;
}

namespace {

Example from_json(const json& j, const LoadOptions& opts) {
  if (!j.is_object()) throw DataError("expected a JSON object");
  for (const char* key : {"id", "passage_sentences", "question", "options", "label"})
    if (!j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  Example ex;
  ex.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  for (const auto& s : j.at("passage_sentences")) {
    Tokens t = tokenize(s.get<std::string>());
    if (!t.empty()) ex.passage_sentences.push_back(std::move(t));
  }
  ex.question = tokenize(j.at("question").get<std::string>());
  for (const auto& o : j.at("options")) ex.options.push_back(tokenize(o.get<std::string>()));
  const auto label = j.at("label").get<long long>();
  if (label < 0) throw DataError("example '" + ex.id + "': negative label");
  ex.label = static_cast<std::size_t>(label);
  if (j.contains("evidence"))
    for (const auto& e : j.at("evidence")) ex.evidence.push_back(e.get<std::size_t>());
  validate(ex);
  ex = truncate(std::move(ex), opts);
  validate(ex);
  return ex;
}

}  // namespace

Example parse_example(std::string_view json_text, const LoadOptions& opts) {
  try {
    return from_json(json::parse(json_text), opts);
  } catch (const json::exception& e) {
    throw DataError(e.what());
  }
}

std::vector<Example> read_jsonl(std::istream& in, const LoadOptions& opts,
                                const std::string& source) {
  std::vector<Example> out;
  std::size_t expected_m = opts.num_options;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    Example ex;
    try {
      ex = parse_example(line, opts);
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (expected_m == 0) expected_m = ex.num_options();
    if (ex.num_options() != expected_m)
      throw DataError(source + ":" + std::to_string(lineno) + ": example '" + ex.id + "' has " +
                      std::to_string(ex.num_options()) + " options, dataset uses " +
                      std::to_string(expected_m));
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> load_jsonl(const std::filesystem::path& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_jsonl(in, opts, path.string());
}

std::string to_json_line(const Example& ex) {
  json j;
  j["id"] = ex.id;
  j["passage_sentences"] = json::array();
  for (const auto& s : ex.passage_sentences) j["passage_sentences"].push_back(join_tokens(s));
  j["question"] = join_tokens(ex.question);
  j["options"] = json::array();
  for (const auto& o : ex.options) j["options"].push_back(join_tokens(o));
  j["label"] = ex.label;
  if (!ex.evidence.empty()) j["evidence"] = ex.evidence;
  return j.dump();
}

void save_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& ex : examples) out << to_json_line(ex) << '\n';
}

namespace {

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    cur.push_back(text[i]);
    const char c = text[i];
    const bool boundary = (c == '.' || c == '!' || c == '?') &&
                          (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])));
    if (boundary) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (std::any_of(cur.begin(), cur.end(), [](unsigned char c) { return !std::isspace(c); }))
    out.push_back(cur);
  return out;
}

}  // namespace

std::vector<Example> convert_race(std::string_view json_text, const LoadOptions& opts) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("RACE document: ") + e.what());
  }
  for (const char* key : {"article", "questions", "options", "answers"})
    if (!doc.contains(key)) throw DataError(std::string("RACE document missing '") + key + "'");
  const std::string base = doc.value("id", std::string("race"));
  const auto sentences = split_sentences(doc.at("article").get<std::string>());
  const auto& questions = doc.at("questions");
  const auto& options = doc.at("options");
  const auto& answers = doc.at("answers");
  if (options.size() != questions.size() || answers.size() != questions.size())
    throw DataError("RACE document '" + base + "': questions/options/answers lengths differ");
  std::vector<Example> out;
  for (std::size_t q = 0; q < questions.size(); ++q) {
    const std::string ans = answers[q].get<std::string>();
    if (ans.size() != 1 || ans[0] < 'A' || ans[0] > 'Z')
      throw DataError("RACE document '" + base + "': bad answer '" + ans + "'");
    json j;
    j["id"] = base + "-" + std::to_string(q);
    j["passage_sentences"] = sentences;
    j["question"] = questions[q];
    j["options"] = options[q];
    j["label"] = ans[0] - 'A';
    try {
      out.push_back(from_json(j, opts));
    } catch (const json::exception& e) {
      throw DataError(std::string("RACE document '") + base + "': " + e.what());
    }
  }
  return out;
}

Vocab::Vocab() {
  add("[PAD]");
  add("[UNK]");
}

std::size_t Vocab::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  ids_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  return tokens_.size() - 1;
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocab::encode(const Tokens& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Vocab Vocab::build(const std::vector<Example>& examples, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  auto count = [&](const Tokens& t) {
    for (const auto& tok : t) ++counts[tok];
  };
  for (const auto& ex : examples) {
    for (const auto& s : ex.passage_sentences) count(s);
    count(ex.question);
    for (const auto& o : ex.options) count(o);
  }
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [tok, n] : sorted) {
    if (max_size && v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  Vocab v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || v.ids_.count(line))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty or duplicate token");
    v.add(line);
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 2; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

void SyntheticSpec::validate() const {
  if (n_examples == 0 || n_sentences == 0 || sentence_len == 0 || question_len == 0 ||
      option_len == 0)
    throw DataError("synthetic spec: counts and lengths must be positive");
  if (n_options < 2) throw DataError("synthetic spec: n_options must be at least 2");
  if (evidence_count == 0 || evidence_count > n_sentences)
    throw DataError("synthetic spec: evidence_count must be in [1, n_sentences]");
  if (!(overlap_rate > 0.0 && overlap_rate <= 1.0))
    throw DataError("synthetic spec: overlap_rate must be in (0, 1]");
  const std::size_t quarter = vocab_size / 4;
  if (quarter < question_len || quarter < n_options * option_len ||
      vocab_size - 2 * quarter < sentence_len)
    throw DataError("synthetic spec: vocab_size " + std::to_string(vocab_size) +
                    " too small for disjoint question/answer/filler token pools");
}

SyntheticSpec SyntheticSpec::from_json(std::string_view json_text) {
  SyntheticSpec s;
  try {
    const json j = json::parse(json_text);
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.n_examples = j.value("n_examples", s.n_examples);
    s.n_sentences = j.value("n_sentences", s.n_sentences);
    s.sentence_len = j.value("sentence_len", s.sentence_len);
    s.question_len = j.value("question_len", s.question_len);
    s.option_len = j.value("option_len", s.option_len);
    s.n_options = j.value("n_options", s.n_options);
    s.evidence_count = j.value("evidence_count", s.evidence_count);
    s.overlap_rate = j.value("overlap_rate", s.overlap_rate);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw DataError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string SyntheticSpec::to_json() const {
  json j{{"vocab_size", vocab_size},     {"n_examples", n_examples},
         {"n_sentences", n_sentences},   {"sentence_len", sentence_len},
         {"question_len", question_len}, {"option_len", option_len},
         {"n_options", n_options},       {"evidence_count", evidence_count},
         {"overlap_rate", overlap_rate}, {"seed", seed}};
  return j.dump();
}

namespace {

std::string word(std::size_t k) { return "w" + std::to_string(k); }

// Distinct draws from [lo, hi).
std::vector<std::size_t> sample_distinct(std::mt19937_64& rng, std::size_t lo, std::size_t hi,
                                         std::size_t count) {
  std::vector<std::size_t> pool(hi - lo);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = lo + i;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

std::vector<Example> gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t quarter = spec.vocab_size / 4;
  const std::size_t q_lo = 0, a_lo = quarter, f_lo = 2 * quarter, f_hi = spec.vocab_size;
  std::uniform_int_distribution<std::size_t> filler(f_lo, f_hi - 1);
  const auto overlap = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.overlap_rate * spec.sentence_len)));

  // `key` tokens fill the first `overlap` slots (cycling), filler the rest,
  // then positions are shuffled.
  auto make_sentence = [&](const std::vector<std::size_t>& key) {
    std::vector<std::size_t> ids;
    for (std::size_t t = 0; t < spec.sentence_len; ++t)
      ids.push_back(t < overlap && !key.empty() ? key[t % key.size()] : filler(rng));
    std::shuffle(ids.begin(), ids.end(), rng);
    Tokens out;
    for (auto k : ids) out.push_back(word(k));
    return out;
  };

  std::vector<Example> out;
  for (std::size_t i = 0; i < spec.n_examples; ++i) {
    Example ex;
    ex.id = "syn-" + std::to_string(spec.seed) + "-" + std::to_string(i);
    const auto q_ids = sample_distinct(rng, q_lo, a_lo, spec.question_len);
    const auto a_ids = sample_distinct(rng, a_lo, f_lo, spec.n_options * spec.option_len);
    ex.label = std::uniform_int_distribution<std::size_t>(0, spec.n_options - 1)(rng);
    std::vector<std::vector<std::size_t>> opt_ids(spec.n_options);
    for (std::size_t j = 0; j < spec.n_options; ++j) {
      opt_ids[j].assign(a_ids.begin() + j * spec.option_len,
                        a_ids.begin() + (j + 1) * spec.option_len);
      Tokens t;
      for (auto k : opt_ids[j]) t.push_back(word(k));
      ex.options.push_back(std::move(t));
    }
    for (auto k : q_ids) ex.question.push_back(word(k));

    ex.evidence = sample_distinct(rng, 0, spec.n_sentences, spec.evidence_count);
    std::sort(ex.evidence.begin(), ex.evidence.end());
    std::vector<std::size_t> others;
    for (std::size_t s = 0; s < spec.n_sentences; ++s)
      if (!std::binary_search(ex.evidence.begin(), ex.evidence.end(), s)) others.push_back(s);
    std::shuffle(others.begin(), others.end(), rng);

    std::vector<std::vector<std::size_t>> keys(spec.n_sentences);
    for (auto e : ex.evidence) {
      // Interleave gold-option and question tokens so short overlaps still
      // touch both.
      auto gold = opt_ids[ex.label];
      auto q = q_ids;
      std::shuffle(gold.begin(), gold.end(), rng);
      std::shuffle(q.begin(), q.end(), rng);
      std::vector<std::size_t> key;
      for (std::size_t t = 0; t < std::max(gold.size(), q.size()); ++t) {
        if (t < gold.size()) key.push_back(gold[t]);
        if (t < q.size()) key.push_back(q[t]);
      }
      keys[e] = std::move(key);
    }
    std::size_t decoy = 0;
    for (std::size_t j = 0; j < spec.n_options && decoy < others.size(); ++j) {
      if (j == ex.label) continue;
      auto key = opt_ids[j];
      std::shuffle(key.begin(), key.end(), rng);
      keys[others[decoy++]] = std::move(key);
    }
    for (std::size_t s = 0; s < spec.n_sentences; ++s)
      ex.passage_sentences.push_back(make_sentence(keys[s]));
    validate(ex);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace dcmn
