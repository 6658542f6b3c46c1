#pragma once
// Skill storage: named, versioned, executable functions with provenance and
// usage statistics. Libraries are value types; each rollout member owns its
// own copy, so there is no cross-member sharing to synchronize.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillrl/common.hpp"
#include "skillrl/dsl.hpp"

namespace skillrl {

struct Skill {
  std::string name;
  std::vector<std::string> params;
  std::string body;  // action-DSL source, must parse
  std::string origin_task_id;
  std::string origin_scenario_id;
  std::string origin_query;
  int created_turn = 1;
  int version = 1;
  long usage_count = 0;
  long success_count = 0;

  bool operator==(const Skill&) const = default;
};

inline void to_json(nlohmann::json& j, const Skill& s) {
  j = nlohmann::json{{"name", s.name},
                     {"params", s.params},
                     {"body", s.body},
                     {"origin_task_id", s.origin_task_id},
                     {"origin_scenario_id", s.origin_scenario_id},
                     {"origin_query", s.origin_query},
                     {"created_turn", s.created_turn},
                     {"version", s.version},
                     {"usage_count", s.usage_count},
                     {"success_count", s.success_count}};
}

inline void from_json(const nlohmann::json& j, Skill& s) {
  j.at("name").get_to(s.name);
  j.at("params").get_to(s.params);
  j.at("body").get_to(s.body);
  j.at("origin_task_id").get_to(s.origin_task_id);
  j.at("origin_scenario_id").get_to(s.origin_scenario_id);
  j.at("origin_query").get_to(s.origin_query);
  j.at("created_turn").get_to(s.created_turn);
  j.at("version").get_to(s.version);
  j.at("usage_count").get_to(s.usage_count);
  j.at("success_count").get_to(s.success_count);
}

// Selector for select_for_context.
struct SelectAll {};
struct SelectScenario {
  std::string scenario_id;
};
struct SelectNames {
  std::vector<std::string> names;
};

class SkillLibrary {
 public:
  SkillLibrary() = default;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const Skill* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  // Entries in creation order.
  const std::vector<Skill>& entries() const { return entries_; }

  const std::map<std::string, std::vector<std::string>>& scenario_index() const {
    return scenario_index_;
  }
  const std::map<std::string, std::vector<std::string>>& query_index() const {
    return query_index_;
  }

  // Insert-or-update. New names start at version 1; redefinition replaces
  // body/params and bumps the version, keeping provenance and counters.
  // Rejects bodies that fail to parse: saving an unverified skill is a
  // caller bug.
  void save_skill(const Skill& skill) {
    if (skill.name.empty()) throw std::invalid_argument("skill name must be non-empty");
    auto parsed = dsl::parse(skill.body);
    if (!parsed.ok())
      throw std::invalid_argument("skill '" + skill.name + "' body does not parse: " +
                                  parsed.error + " (line " +
                                  std::to_string(parsed.error_line) + ")");
    auto it = index_.find(skill.name);
    if (it == index_.end()) {
      Skill s = skill;
      s.version = 1;
      index_[s.name] = entries_.size();
      scenario_index_[s.origin_scenario_id].push_back(s.name);
      query_index_[s.origin_query].push_back(s.name);
      entries_.push_back(std::move(s));
    } else {
      Skill& s = entries_[it->second];
      s.params = skill.params;
      s.body = skill.body;
      s.version += 1;
    }
  }

  void record_usage(const std::string& name, bool success) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw std::invalid_argument("record_usage: unknown skill '" + name + "'");
    Skill& s = entries_[it->second];
    s.usage_count += 1;
    if (success) s.success_count += 1;
  }

  // Deterministic context selection: creation order, unknown ids match nothing.
  std::vector<Skill> select_for_context(const SelectAll&) const { return entries_; }

  std::vector<Skill> select_for_context(const SelectScenario& sel) const {
    std::vector<Skill> out;
    for (const Skill& s : entries_)
      if (s.origin_scenario_id == sel.scenario_id) out.push_back(s);
    return out;
  }

  std::vector<Skill> select_for_context(const SelectNames& sel) const {
    std::vector<Skill> out;
    for (const std::string& name : sel.names)
      if (const Skill* s = find(name)) out.push_back(*s);
    return out;
  }

  // JSONL: one skill per line, creation order, UTF-8.
  std::string serialize() const {
    std::string out;
    for (const Skill& s : entries_) {
      out += nlohmann::json(s).dump();
      out += '\n';
    }
    return out;
  }

  static SkillLibrary deserialize(std::string_view text) {
    SkillLibrary lib;
    int line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      ++line_no;
      if (!line.empty()) {
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
          throw std::runtime_error("skill library parse error at line " +
                                   std::to_string(line_no));
        Skill s;
        try {
          s = j.get<Skill>();
        } catch (const nlohmann::json::exception& e) {
          throw std::runtime_error("skill library parse error at line " +
                                   std::to_string(line_no) + ": " + e.what());
        }
        if (lib.contains(s.name))
          throw std::runtime_error("skill library parse error at line " +
                                   std::to_string(line_no) + ": duplicate name '" +
                                   s.name + "'");
        if (!dsl::parse(s.body).ok())
          throw std::runtime_error("skill library parse error at line " +
                                   std::to_string(line_no) + ": body of '" + s.name +
                                   "' does not parse");
        lib.insert_raw(std::move(s));
      }
      start = end + 1;
    }
    return lib;
  }

  bool operator==(const SkillLibrary& other) const { return entries_ == other.entries_; }

  // Restores a skill verbatim (version and counters included).
  void insert_raw(Skill s) {
    index_[s.name] = entries_.size();
    scenario_index_[s.origin_scenario_id].push_back(s.name);
    query_index_[s.origin_query].push_back(s.name);
    entries_.push_back(std::move(s));
  }

  // Insert-or-replace verbatim; store indexing uses this to mirror snapshots.
  void upsert_raw(const Skill& s) {
    auto it = index_.find(s.name);
    if (it == index_.end())
      insert_raw(s);
    else
      entries_[it->second] = s;
  }

 private:
  std::vector<Skill> entries_;  // creation order
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::string>> scenario_index_;
  std::map<std::string, std::vector<std::string>> query_index_;
};

}  // namespace skillrl
