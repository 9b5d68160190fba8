#include <gtest/gtest.h>

#include <regex>
#include <set>
#include <thread>

#include "guiguard/pseudonym.hpp"
#include "guiguard/text.hpp"

using namespace guiguard;

namespace {
const std::regex kEmail(R"(^[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}$)");
}

TEST(Classify, Shapes) {
  EXPECT_EQ(classify_entity("alice@mail.com", PrivacyCategory::kContactFinancial), EntityShape::kEmail);
  EXPECT_EQ(classify_entity("+1 (555) 010-2030", std::nullopt), EntityShape::kPhone);
  EXPECT_EQ(classify_entity("221 Baker Street", std::nullopt), EntityShape::kAddress);
  EXPECT_EQ(classify_entity("Alice Smith", PrivacyCategory::kCoreIdentity), EntityShape::kPersonName);
  EXPECT_EQ(classify_entity("Order 42", PrivacyCategory::kBehaviorContext), EntityShape::kGeneric);
}

TEST(Memory, StableAcrossQueries) {
  ReplacementMemory m("traj-1");
  const auto first = m.get_or_assign("Alice Smith", PrivacyCategory::kCoreIdentity);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(m.get_or_assign("Alice Smith", PrivacyCategory::kCoreIdentity), first);
  EXPECT_EQ(m.size(), 1u);
}

TEST(Memory, KeysAreNormalized) {
  ReplacementMemory m("s");
  EXPECT_EQ(m.get_or_assign("  Alice   Smith ", PrivacyCategory::kCoreIdentity),
            m.get_or_assign("Alice Smith", PrivacyCategory::kCoreIdentity));
  EXPECT_TRUE(m.lookup("Alice Smith"));
  EXPECT_FALSE(m.lookup("Bob"));
}

TEST(Memory, EmailKeepsShapeAndDiffers) {
  ReplacementMemory m("s");
  const auto p = m.get_or_assign("alice@mail.com", PrivacyCategory::kContactFinancial);
  EXPECT_NE(p, "alice@mail.com");
  EXPECT_TRUE(std::regex_match(p, kEmail)) << p;
}

TEST(Memory, PhoneKeepsDigitLayout) {
  ReplacementMemory m("s");
  const std::string original = "+1 555-010-2030";
  const auto p = m.get_or_assign(original, PrivacyCategory::kContactFinancial);
  ASSERT_EQ(p.size(), original.size()) << p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(std::isdigit(static_cast<unsigned char>(p[i])) != 0,
              std::isdigit(static_cast<unsigned char>(original[i])) != 0);
  }
  EXPECT_NE(p, original);
}

TEST(Memory, DistinctEntitiesGetDistinctPseudonyms) {
  ReplacementMemory m("fixture");
  std::set<std::string> seen;
  for (int i = 0; i < 300; ++i) {
    const auto p = m.get_or_assign("Person " + std::string(1, static_cast<char>('A' + i % 26)) + std::to_string(i),
                                   PrivacyCategory::kCoreIdentity);
    EXPECT_TRUE(seen.insert(p).second) << p;
  }
  for (int i = 0; i < 300; ++i) {
    EXPECT_TRUE(seen.insert(m.get_or_assign("user" + std::to_string(i) + "@corp.example",
                                            PrivacyCategory::kContactFinancial)).second);
  }
}

TEST(Memory, NeverMapsToOriginal) {
  // A generator that proposes the original first must be overridden.
  ReplacementMemory m("s", [](std::string_view, std::string_view text, std::optional<PrivacyCategory>, int attempt) {
    return attempt == 0 ? std::string(text) : "alt" + std::to_string(attempt);
  });
  EXPECT_EQ(m.get_or_assign("Alice", std::nullopt), "alt1");
}

TEST(Memory, CollisionsAreResolved) {
  ReplacementMemory m("s", [](std::string_view, std::string_view, std::optional<PrivacyCategory>, int attempt) {
    return attempt < 2 ? std::string("same") : "other" + std::to_string(attempt);
  });
  const auto a = m.get_or_assign("A", std::nullopt);
  const auto b = m.get_or_assign("B", std::nullopt);
  EXPECT_NE(a, b);
}

TEST(Memory, ScopesDiffer) {
  ReplacementMemory a("scope-a"), b("scope-b");
  int same = 0;
  for (int i = 0; i < 20; ++i) {
    const std::string name = "Name" + std::to_string(i) + " Smith";
    same += a.get_or_assign(name, PrivacyCategory::kCoreIdentity) == b.get_or_assign(name, PrivacyCategory::kCoreIdentity);
  }
  EXPECT_LT(same, 20);
}

TEST(Memory, DeterministicAcrossInstances) {
  ReplacementMemory a("t"), b("t");
  EXPECT_EQ(a.get_or_assign("Carol Diaz", PrivacyCategory::kCoreIdentity),
            b.get_or_assign("Carol Diaz", PrivacyCategory::kCoreIdentity));
}

TEST(Memory, SnapshotInInsertionOrder) {
  ReplacementMemory m("s");
  m.get_or_assign("Zed", std::nullopt);
  m.get_or_assign("Amy", PrivacyCategory::kCoreIdentity);
  m.get_or_assign("Zed", std::nullopt);
  const auto snap = m.snapshot();
  ASSERT_EQ(snap.size(), 2u);
  EXPECT_EQ(snap[0].original, "Zed");
  EXPECT_EQ(snap[1].original, "Amy");
  EXPECT_EQ(snap[1].category, PrivacyCategory::kCoreIdentity);
}

TEST(Memory, ConcurrentAssignmentIsConsistent) {
  ReplacementMemory m("s");
  std::vector<std::vector<std::string>> results(8);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 100; ++i) results[t].push_back(m.get_or_assign("entity " + std::to_string(i), std::nullopt));
    });
  }
  for (auto& th : threads) th.join();
  for (int t = 1; t < 8; ++t) EXPECT_EQ(results[t], results[0]);
  EXPECT_EQ(m.size(), 100u);
}
