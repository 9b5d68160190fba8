#include "guiguard/pseudonym.hpp"

#include <algorithm>
#include <array>
#include <regex>
#include <sstream>

#include "guiguard/codec.hpp"
#include "guiguard/error.hpp"
#include "guiguard/text.hpp"

namespace guiguard {
namespace {

// 100 x 100 names gives 10^4 full names; emails and addresses multiply further.
constexpr std::array<const char*, 100> kFirstNames = {
    "Aaron",   "Abigail", "Adrian",  "Aisha",   "Alan",    "Alice",   "Amara",   "Andre",
    "Anika",   "Arjun",   "Ava",     "Bella",   "Benjamin", "Bianca", "Brandon", "Bruno",
    "Caleb",   "Camila",  "Carmen",  "Cedric",  "Chloe",   "Clara",   "Colin",   "Daniel",
    "Daria",   "David",   "Delia",   "Diego",   "Dmitri",  "Eleanor", "Elias",   "Elena",
    "Emil",    "Emma",    "Erik",    "Esther",  "Ethan",   "Farah",   "Felix",   "Fiona",
    "Gabriel", "Grace",   "Hana",    "Hannah",  "Hector",  "Helena",  "Hugo",    "Ian",
    "Ines",    "Isaac",   "Isla",    "Ivan",    "Jade",    "Jonas",   "Julia",   "Kai",
    "Karen",   "Keiko",   "Kenji",   "Lara",    "Leo",     "Lina",    "Lucas",   "Luna",
    "Malik",   "Maya",    "Milo",    "Mina",    "Nadia",   "Naomi",   "Nico",    "Nina",
    "Noah",    "Olga",    "Omar",    "Oscar",   "Paula",   "Pedro",   "Priya",   "Quinn",
    "Rafael",  "Rania",   "Rosa",    "Ruben",   "Sara",    "Selim",   "Sofia",   "Stefan",
    "Tara",    "Theo",    "Tomas",   "Uma",     "Victor",  "Vera",    "Wen",     "Xavier",
    "Yara",    "Yusuf",   "Zara",    "Zoe"};

constexpr std::array<const char*, 100> kLastNames = {
    "Abbott",   "Adler",    "Alvarez",  "Andersen", "Arnold",   "Baker",    "Barros",
    "Becker",   "Bennett",  "Berg",     "Blake",    "Bauer",    "Brooks",   "Burke",
    "Campbell", "Carter",   "Castro",   "Chen",     "Clarke",   "Cohen",    "Collins",
    "Cruz",     "Dalton",   "Davies",   "Diaz",     "Dixon",    "Duarte",   "Ellis",
    "Engel",    "Evans",    "Farrell",  "Fischer",  "Foster",   "Franco",   "Fuller",
    "Garcia",   "Gibson",   "Graham",   "Gray",     "Hansen",   "Harper",   "Hayes",
    "Herrera",  "Holm",     "Hughes",   "Ibarra",   "Ito",      "Jensen",   "Jordan",
    "Kaur",     "Keller",   "Kim",      "Klein",    "Kowalski", "Lambert",  "Larsen",
    "Lee",      "Lopez",    "Lund",     "Marsh",    "Martin",   "Meyer",    "Molina",
    "Morris",   "Nakamura", "Novak",    "Olsen",    "Ortiz",    "Park",     "Patel",
    "Perez",    "Porter",   "Quinn",    "Ramos",    "Reyes",    "Richter",  "Rossi",
    "Russo",    "Sato",     "Schmidt",  "Silva",    "Singh",    "Stone",    "Suzuki",
    "Tanaka",   "Torres",   "Turner",   "Vargas",   "Vogel",    "Wagner",   "Walsh",
    "Weber",    "Wells",    "Wolf",     "Wong",     "Xu",       "Young",    "Zhang",
    "Ziegler",  "Zimmer"};

constexpr std::array<const char*, 12> kMailDomains = {
    "example.com",   "example.org",  "example.net",   "mail.example", "inbox.example",
    "post.example",  "demo-mail.com", "sample.org",   "placeholder.net", "testmail.org",
    "anon-mail.net", "relay.example"};

constexpr std::array<const char*, 40> kStreets = {
    "Maple",    "Oak",      "Cedar",   "Pine",     "Elm",      "Birch",   "Willow",  "Aspen",
    "Juniper",  "Laurel",   "Hawthorn", "Chestnut", "Magnolia", "Poplar", "Sycamore", "Linden",
    "Harbor",   "River",    "Lake",    "Meadow",   "Hill",     "Valley",  "Forest",  "Garden",
    "Park",     "Bridge",   "Mill",    "Station",  "Market",   "Church",  "School",  "Spring",
    "Sunset",   "Highland", "Orchard", "Quarry",   "Canal",    "Beacon",  "Summit",  "Prairie"};

constexpr std::array<const char*, 8> kStreetSuffixes = {"Street", "Avenue", "Road", "Lane",
                                                        "Drive",  "Court",  "Way",  "Place"};

// Deterministic byte stream from SHA-256 blocks.
class HashStream {
 public:
  explicit HashStream(std::string seed) : seed_(std::move(seed)) { refill(); }

  std::uint64_t next() {
    if (pos_ + 8 > block_.size()) refill();
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | block_[pos_++];
    return v;
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  void refill() {
    block_ = codec::sha256(seed_ + '\x1f' + std::to_string(counter_++));
    pos_ = 0;
  }
  std::string seed_;
  std::array<std::uint8_t, 32> block_{};
  std::size_t pos_ = 0;
  std::uint64_t counter_ = 0;
};

bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_ascii_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

bool looks_like_name(std::string_view s) {
  const auto ws = words(s);
  if (ws.empty() || ws.size() > 4) return false;
  for (const auto& w : ws) {
    if (!is_ascii_upper(w.front())) return false;
    for (char c : w) {
      if (!(is_ascii_upper(c) || is_ascii_lower(c) || c == '\'' || c == '-' || c == '.')) return false;
    }
  }
  return true;
}

std::string shape_preserving(std::string_view original, HashStream& h) {
  std::string out;
  for (char c : original) {
    if (is_digit(c)) {
      out.push_back(static_cast<char>('0' + h.below(10)));
    } else if (is_ascii_upper(c)) {
      out.push_back(static_cast<char>('A' + h.below(26)));
    } else if (is_ascii_lower(c)) {
      out.push_back(static_cast<char>('a' + h.below(26)));
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string lower(std::string s) { return text::to_lower_ascii(s); }

}  // namespace

EntityShape classify_entity(std::string_view text_in, std::optional<PrivacyCategory> category) {
  static const std::regex kEmail(R"(^[^\s@]+@[^\s@]+\.[^\s@]+$)");
  static const std::regex kPhone(R"(^\+?[0-9 ().\-]+$)");
  static const std::regex kAddress(
      R"(^\d+[A-Za-z]?\s+.*\b(street|st|avenue|ave|road|rd|boulevard|blvd|lane|ln|drive|dr|way|court|ct|place|pl)\b.*$)",
      std::regex::icase);
  const std::string s(text_in);
  if (std::regex_match(s, kEmail)) return EntityShape::kEmail;
  if (std::regex_match(s, kPhone)) {
    const auto digits = std::count_if(s.begin(), s.end(), is_digit);
    if (digits >= 7 && digits <= 15) return EntityShape::kPhone;
  }
  if (std::regex_match(s, kAddress)) return EntityShape::kAddress;
  const bool name_category = !category || *category == PrivacyCategory::kCoreIdentity ||
                             *category == PrivacyCategory::kContactFinancial;
  if (name_category && looks_like_name(s)) return EntityShape::kPersonName;
  return EntityShape::kGeneric;
}

std::string default_pseudonym(std::string_view scope_id, std::string_view text_in,
                              std::optional<PrivacyCategory> category, int attempt) {
  HashStream h(std::string(scope_id) + '\x1f' + std::string(text_in) + '\x1f' +
               std::to_string(attempt));
  switch (classify_entity(text_in, category)) {
    case EntityShape::kEmail: {
      std::ostringstream os;
      os << lower(kFirstNames[h.below(kFirstNames.size())]) << '.'
         << lower(kLastNames[h.below(kLastNames.size())]) << h.below(100) << '@'
         << kMailDomains[h.below(kMailDomains.size())];
      return os.str();
    }
    case EntityShape::kPhone: {
      std::string out;
      for (char c : text_in) out.push_back(is_digit(c) ? static_cast<char>('0' + h.below(10)) : c);
      return out;
    }
    case EntityShape::kAddress: {
      std::ostringstream os;
      os << 1 + h.below(9999) << ' ' << kStreets[h.below(kStreets.size())] << ' '
         << kStreetSuffixes[h.below(kStreetSuffixes.size())];
      return os.str();
    }
    case EntityShape::kPersonName: {
      const std::string first = kFirstNames[h.below(kFirstNames.size())];
      const std::string last = kLastNames[h.below(kLastNames.size())];
      return words(text_in).size() == 1 ? first : first + " " + last;
    }
    case EntityShape::kGeneric: {
      std::string out = shape_preserving(text_in, h);
      if (out == text_in) {
        // Nothing substitutable (e.g. non-Latin script): fall back to a token.
        std::ostringstream os;
        os << "Entity-" << std::hex << (h.next() & 0xFFFFFF);
        out = os.str();
      }
      return out;
    }
  }
  return {};
}

ReplacementMemory::ReplacementMemory(std::string scope_id, Generator generator)
    : scope_id_(std::move(scope_id)), generator_(std::move(generator)) {}

std::string ReplacementMemory::get_or_assign(std::string_view entity_text,
                                             std::optional<PrivacyCategory> category) {
  const std::string key = text::normalize(entity_text);
  if (key.empty()) throw Error(ErrorCode::kEmptyText, "cannot pseudonymize empty text");

  std::lock_guard lock(mutex_);
  if (auto it = index_.find(key); it != index_.end()) return entries_[it->second].pseudonym;

  std::string chosen;
  for (int attempt = 0; attempt < 64 && chosen.empty(); ++attempt) {
    std::string candidate = generator_(scope_id_, key, category, attempt);
    if (!candidate.empty() && candidate != key && !used_.count(candidate)) chosen = std::move(candidate);
  }
  for (int n = 2; chosen.empty(); ++n) {
    std::string candidate = generator_(scope_id_, key, category, 0) + "-" + std::to_string(n);
    if (candidate != key && !used_.count(candidate)) chosen = std::move(candidate);
  }
  used_.insert(chosen);
  index_.emplace(key, entries_.size());
  entries_.push_back({key, chosen, category});
  return chosen;
}

std::optional<std::string> ReplacementMemory::lookup(std::string_view entity_text) const {
  const std::string key = text::normalize(entity_text);
  std::lock_guard lock(mutex_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second].pseudonym;
}

std::vector<ReplacementMemory::Entry> ReplacementMemory::snapshot() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t ReplacementMemory::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

}  // namespace guiguard
