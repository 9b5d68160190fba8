#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "guiguard/model.hpp"

namespace guiguard {

enum class EntityShape { kEmail, kPhone, kPersonName, kAddress, kGeneric };

EntityShape classify_entity(std::string_view text, std::optional<PrivacyCategory> category);

// Deterministic local generator: a SHA-256 of (scope, text, attempt) picks
// from category-typed pools. `attempt` > 0 is used to escape collisions.
std::string default_pseudonym(std::string_view scope_id, std::string_view text,
                              std::optional<PrivacyCategory> category, int attempt);

// Scope-stable original -> pseudonym map. Append-only; thread-safe.
class ReplacementMemory {
 public:
  using Generator = std::function<std::string(std::string_view scope_id, std::string_view text,
                                              std::optional<PrivacyCategory> category,
                                              int attempt)>;

  struct Entry {
    std::string original;
    std::string pseudonym;
    std::optional<PrivacyCategory> category;  // at first sight
  };

  explicit ReplacementMemory(std::string scope_id, Generator generator = default_pseudonym);

  ReplacementMemory(const ReplacementMemory&) = delete;
  ReplacementMemory& operator=(const ReplacementMemory&) = delete;

  const std::string& scope_id() const { return scope_id_; }

  // Looks up the normalized text; assigns and records a fresh pseudonym on a
  // miss. Pseudonyms never equal their original and are distinct per scope.
  // Throws Error{kEmptyText}.
  std::string get_or_assign(std::string_view entity_text,
                            std::optional<PrivacyCategory> category);

  std::optional<std::string> lookup(std::string_view entity_text) const;

  // Insertion order.
  std::vector<Entry> snapshot() const;
  std::size_t size() const;

 private:
  std::string scope_id_;
  Generator generator_;
  mutable std::mutex mutex_;
  std::map<std::string, std::size_t> index_;
  std::vector<Entry> entries_;
  std::set<std::string> used_;
};

}  // namespace guiguard
