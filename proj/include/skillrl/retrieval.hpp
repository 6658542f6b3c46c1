#pragma once
// Skill acquisition strategies: same-scenario lookup, query retrieval by
// word-bigram Jaccard similarity or embedding cosine with thresholds, and
// top-k skill retrieval treating skills as documents.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "skillrl/common.hpp"
#include "skillrl/skill_library.hpp"

namespace skillrl {

// Word-level 2-gram Jaccard similarity. Texts too short for bigrams compare
// by raw equality.
inline double jaccard_2gram(std::string_view a, std::string_view b) {
  auto bigrams = [](std::string_view text) {
    std::set<std::pair<std::string, std::string>> out;
    std::vector<std::string> words = split_ws(text);
    for (std::size_t i = 0; i + 1 < words.size(); ++i)
      out.insert({words[i], words[i + 1]});
    return out;
  };
  std::set<std::pair<std::string, std::string>> A = bigrams(a);
  std::set<std::pair<std::string, std::string>> B = bigrams(b);
  if (A.empty() && B.empty()) return a == b ? 1.0 : 0.0;
  std::size_t intersection = 0;
  for (const auto& g : A)
    if (B.count(g)) ++intersection;
  std::size_t unions = A.size() + B.size() - intersection;
  return static_cast<double>(intersection) / static_cast<double>(unions);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
  virtual int dimension() const = 0;
  virtual bool deterministic() const = 0;
};

// Seeded feature hash of word counts, unit-normalized. Deterministic, no
// model downloads; real embedders plug in over HTTP.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(int dimension = 64, std::uint64_t seed = 1)
      : dimension_(dimension), seed_(seed) {}

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
      std::vector<double> v(static_cast<std::size_t>(dimension_), 0.0);
      for (const std::string& word : split_ws(text)) {
        std::uint64_t h = mix_seed(seed_, fnv1a64(word));
        std::size_t slot = h % static_cast<std::uint64_t>(dimension_);
        double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        v[slot] += sign;
      }
      double norm = 0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0)
        for (double& x : v) x /= norm;
      out.push_back(std::move(v));
    }
    return out;
  }

  int dimension() const override { return dimension_; }
  bool deterministic() const override { return true; }

 private:
  int dimension_;
  std::uint64_t seed_;
};

// Embedding text for a skill: name + parameter list + first comment line of
// the body (skills carry a leading '#' doc line by convention).
inline std::string skill_embedding_text(const Skill& s) {
  std::string text = s.name;
  for (const std::string& p : s.params) text += " " + p;
  std::size_t start = 0;
  while (start <= s.body.size()) {
    std::size_t end = s.body.find('\n', start);
    if (end == std::string::npos) end = s.body.size();
    std::string_view line(s.body.data() + start, end - start);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
      line.remove_prefix(1);
    if (!line.empty()) {
      if (line.front() == '#') {
        line.remove_prefix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        text += " ";
        text += std::string(line);
      }
      break;  // only a leading comment counts
    }
    start = end + 1;
  }
  return text;
}

// ---------------------------------------------------------------------------
// SkillStore: per-query and per-scenario libraries plus a flat skill list.
// Retrieval reads a frozen snapshot; indexing happens between tasks.

class SkillStore {
 public:
  struct Entry {
    Skill skill;
  };

  void index_skill(const Skill& skill) {
    by_query_[skill.origin_query].upsert_raw(skill);
    by_scenario_[skill.origin_scenario_id].upsert_raw(skill);
    for (Entry& e : flat_)
      if (e.skill.name == skill.name && e.skill.origin_query == skill.origin_query) {
        e.skill = skill;
        return;
      }
    flat_.push_back({skill});
  }

  const std::map<std::string, SkillLibrary>& by_query() const { return by_query_; }
  const std::map<std::string, SkillLibrary>& by_scenario() const { return by_scenario_; }
  const std::vector<Entry>& flat() const { return flat_; }

  std::size_t distinct_names() const {
    std::set<std::string> names;
    for (const Entry& e : flat_) names.insert(e.skill.name);
    return names.size();
  }

 private:
  std::map<std::string, SkillLibrary> by_query_;
  std::map<std::string, SkillLibrary> by_scenario_;
  std::vector<Entry> flat_;
};

inline SkillLibrary same_scenario(const SkillStore& store, const std::string& scenario_id) {
  auto it = store.by_scenario().find(scenario_id);
  return it == store.by_scenario().end() ? SkillLibrary{} : it->second;
}

// Most similar stored query by word-bigram Jaccard; its library is inherited
// whole when the best score reaches the threshold. Ties break to the
// lexicographically smallest query.
inline SkillLibrary retrieve_query_ngram(const SkillStore& store, const std::string& query,
                                         double threshold = 0.5) {
  const SkillLibrary* best = nullptr;
  double best_score = -1.0;
  for (const auto& [stored_query, library] : store.by_query()) {
    double score = jaccard_2gram(query, stored_query);
    if (score > best_score) {  // map iteration is lexicographic: first wins ties
      best_score = score;
      best = &library;
    }
  }
  if (best && best_score >= threshold) return *best;
  return {};
}

inline SkillLibrary retrieve_query_embedding(const SkillStore& store, const std::string& query,
                                             Embedder& embedder, double threshold = 0.65) {
  if (store.by_query().empty()) return {};
  std::vector<std::string> texts = {query};
  for (const auto& [stored_query, library] : store.by_query()) texts.push_back(stored_query);
  std::vector<std::vector<double>> vectors = embedder.embed(texts);

  const SkillLibrary* best = nullptr;
  double best_score = -1.0;
  std::size_t i = 1;
  for (const auto& [stored_query, library] : store.by_query()) {
    double score = cosine(vectors[0], vectors[i++]);
    if (score > best_score) {
      best_score = score;
      best = &library;
    }
  }
  if (best && best_score >= threshold) return *best;
  return {};
}

// Top-k skills by cosine against the query embedding, descending score with
// lexicographic name tiebreak. Duplicate names keep their best-ranked copy.
inline std::vector<Skill> retrieve_skill_embedding(const SkillStore& store,
                                                   const std::string& query,
                                                   Embedder& embedder, int top_k = 5) {
  if (top_k <= 0 || store.flat().empty()) return {};
  std::vector<std::string> texts = {query};
  for (const auto& e : store.flat()) texts.push_back(skill_embedding_text(e.skill));
  std::vector<std::vector<double>> vectors = embedder.embed(texts);

  struct Ranked {
    double score;
    const Skill* skill;
  };
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < store.flat().size(); ++i)
    ranked.push_back({cosine(vectors[0], vectors[i + 1]), &store.flat()[i].skill});
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.skill->name < b.skill->name;
  });

  std::vector<Skill> out;
  std::set<std::string> seen;
  for (const Ranked& r : ranked) {
    if (static_cast<int>(out.size()) >= top_k) break;
    if (seen.insert(r.skill->name).second) out.push_back(*r.skill);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: one JSONL library per stored query plus an index file mapping
// file names back to queries and scenarios.

inline void save_store(const SkillStore& store, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  int file_no = 0;
  for (const auto& [query, library] : store.by_query()) {
    std::string file = "query_" + std::to_string(file_no++) + ".jsonl";
    write_text_file(dir + "/" + file, library.serialize());
    std::set<std::string> scenarios;
    for (const Skill& s : library.entries()) scenarios.insert(s.origin_scenario_id);
    index.push_back({{"file", file},
                     {"query", query},
                     {"scenarios", std::vector<std::string>(scenarios.begin(), scenarios.end())}});
  }
  write_text_file(dir + "/index.json", index.dump(2) + "\n");
}

inline SkillStore load_store(const std::string& dir) {
  SkillStore store;
  nlohmann::json index = nlohmann::json::parse(read_text_file(dir + "/index.json"));
  for (const auto& entry : index) {
    SkillLibrary library = SkillLibrary::deserialize(
        read_text_file(dir + "/" + entry.at("file").get<std::string>()));
    for (const Skill& s : library.entries()) store.index_skill(s);
  }
  return store;
}

}  // namespace skillrl
