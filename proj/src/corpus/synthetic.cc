// Closed grammar of messaging queries with rule-derived gold rephrases.
//
// Content spans are built so that the rephrase is a function of the content
// alone: third-person recipient pronouns flip to second person,
// "if"/"whether" clauses and uninverted wh-clauses become questions, and
// imperatives from "remind me to" frames flip first-person possessives.
// EXACT contents never contain any of these triggers.

#include <array>
#include <cctype>
#include <random>
#include <string>
#include <vector>

#include "rephrase/corpus.h"

namespace rephrase::corpus {
namespace {

struct Verb {
  const char* base;
  const char* s3;
  const char* past;
  const char* ing;                   // nullptr for stative verbs
  std::vector<const char*> objects;  // {P} possessive slot, {N} name slot
};

const std::vector<Verb>& verbs() {
  static const std::vector<Verb> v = {
      {"take", "takes", "took", "taking", {"{P} pills", "the dog out", "{P} car to the shop"}},
      {"bring", "brings", "brought", "bringing", {"{P} charger", "the cake", "{P} laptop"}},
      {"call", "calls", "called", "calling", {"{N}", "{P} mom", "the doctor"}},
      {"see", "sees", "saw", nullptr, {"{N} at the mall", "{P} brother", "the new movie"}},
      {"have", "has", "had", nullptr, {"{P} keys", "the tickets", "{P} umbrella"}},
      {"need", "needs", "needed", nullptr, {"a ride home", "{P} help", "the car tonight"}},
      {"finish", "finishes", "finished", "finishing", {"the report", "{P} homework"}},
      {"meet", "meets", "met", "meeting", {"{N} at the station", "{P} sister downtown"}},
      {"feed", "feeds", "fed", "feeding", {"the cat", "{P} fish"}},
      {"buy", "buys", "bought", "buying", {"milk", "the tickets", "a gift for {N}"}},
      {"lock", "locks", "locked", "locking", {"the door", "{P} bike"}},
      {"leave", "leaves", "left", "leaving", {"{P} sunglasses there", "the keys with {N}"}},
      {"pick up", "picks up", "picked up", "picking up", {"{P} kids", "the groceries"}},
      {"fix", "fixes", "fixed", "fixing", {"{P} bike", "the sink"}},
      {"wash", "washes", "washed", "washing", {"the dishes", "{P} car"}},
  };
  return v;
}

// Verb phrases whose object is the recipient; {O} is the object pronoun.
constexpr std::array<const char*, 7> kPersonPhrases = {
    "call {O} tonight", "pick {O} up",        "meet {O} at the station", "help {O} with the move",
    "text {O} later",   "visit {O} tomorrow", "drive {O} home"};

constexpr std::array<const char*, 4> kModals = {"can", "will", "should", "could"};

constexpr std::array<const char*, 30> kCommonNames = {
    "Kira", "Donna", "Brad", "Jo",   "Alice", "Sam",  "Maya", "Omar",  "Lena", "Theo",
    "Nina", "Raj",   "Eva",  "Luca", "Iris",  "Hugo", "Zoe",  "Ben",   "Ava",  "Max",
    "Tess", "Owen",  "Rosa", "Ivan", "Mina",  "Carl", "Dana", "Felix", "Gwen", "Noor"};

constexpr std::array<const char*, 19> kOnsets = {"b", "d", "f", "g", "k",  "l",  "m",  "n",  "p", "r",
                                                 "s", "t", "v", "z", "br", "tr", "kr", "st", "sh"};
constexpr std::array<const char*, 7> kVowels = {"a", "e", "i", "o", "u", "ai", "ou"};
constexpr std::array<const char*, 7> kCodas = {"", "n", "r", "s", "l", "x", "th"};

constexpr std::array<const char*, 6> kWhenSubjects = {"dinner",      "the party",   "the game",
                                                      "the meeting", "the concert", "lunch"};

constexpr std::array<const char*, 8> kFixedExact = {
    "happy birthday",     "I will be on time", "dinner is ready", "the meeting moved to Friday",
    "good luck tomorrow", "I am running late", "see you soon",    "thanks for the ride"};

constexpr std::array<const char*, 4> kPluralSubjects = {"the kids", "the cookies", "the tickets",
                                                        "the boxes"};
constexpr std::array<const char*, 4> kAdjectives = {"ready", "here", "outside", "done"};

struct Recipient {
  std::string subj;  // he / she
  std::string obj;   // him / her
  std::string poss;  // his / her
};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  Utterance next(std::size_t index, std::uint64_t seed) {
    Utterance u;
    u.id = "syn-" + std::to_string(seed) + "-" + std::to_string(index);
    Words carrier;
    Words content;
    Words rephrase;
    bool exact = coin(0.5);
    if (exact) {
      make_exact(carrier, content);
      u.cls = RephraseClass::kExact;
    } else {
      make_rephrase(carrier, content, rephrase);
      u.cls = RephraseClass::kRephrase;
      u.rephrases.push_back(rephrase);
      if (!alt_.empty()) u.rephrases.push_back(alt_);
    }
    if (coin(0.5)) carrier[0][0] = static_cast<char>(std::toupper(carrier[0][0]));
    std::string raw = text::join(carrier) + " " + text::join(content);
    u.query_tokens = text::tokenize(raw);
    u.span_start = carrier.size();
    u.span_end = carrier.size() + content.size();
    return u;
  }

 private:
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  template <typename C>
  std::string choose(const C& c) {
    return std::string(c[pick(c.size())]);
  }

  std::string invented_name() {
    std::string s = choose(kOnsets) + choose(kVowels) + choose(kOnsets) + choose(kVowels) + choose(kCodas);
    s[0] = static_cast<char>(std::toupper(s[0]));
    return s;
  }

  std::string name() { return coin(0.5) ? choose(kCommonNames) : invented_name(); }

  Recipient recipient() {
    if (coin(0.5)) return {"he", "him", "his"};
    return {"she", "her", "her"};
  }

  static void append(Words& out, const std::string& phrase) {
    for (auto& w : text::split_words(phrase)) out.push_back(std::move(w));
  }

  // Expands an object template. `poss` fills {P} in the content and
  // `poss_rephrased` fills it in the rephrase.
  void object(const Verb& v, const std::string& poss, const std::string& poss_rephrased, Words& content,
              Words& rephrase) {
    std::string tmpl = v.objects[pick(v.objects.size())];
    std::string n = tmpl.find("{N}") != std::string::npos ? name() : "";
    auto fill = [&](const std::string& p) {
      std::string s = tmpl;
      if (auto at = s.find("{P}"); at != std::string::npos) s.replace(at, 3, p);
      if (auto at = s.find("{N}"); at != std::string::npos) s.replace(at, 3, n);
      return s;
    };
    append(content, fill(poss));
    append(rephrase, fill(poss_rephrased));
  }

  // Possessive for a clause whose recipient is `r`: mine stays, the
  // recipient's flips, or a plain determiner.
  std::pair<std::string, std::string> possessive(const Recipient& r) {
    switch (pick(3)) {
      case 0:
        return {"my", "my"};
      case 1:
        return {r.poss, "your"};
      default:
        return {"the", "the"};
    }
  }

  const Verb& verb() { return verbs()[pick(verbs().size())]; }

  const Verb& dynamic_verb() {
    while (true) {
      const Verb& v = verb();
      if (v.ing != nullptr) return v;
    }
  }

  void make_rephrase(Words& carrier, Words& content, Words& rephrase) {
    alt_.clear();
    std::string who = name();
    switch (pick(4)) {
      case 0: {  // declarative with pronoun flip
        static const std::array<const char*, 3> frames = {"tell {N} that", "message {N} and say",
                                                          "let {N} know"};
        append(carrier, replace_name(choose(frames), who));
        declarative(content, rephrase);
        break;
      }
      case 1:
      case 2: {  // yes/no question
        static const std::array<const char*, 2> frames = {"ask {N}", "message {N} and ask"};
        append(carrier, replace_name(choose(frames), who));
        yes_no_question(content, rephrase);
        break;
      }
      default: {
        if (coin(0.5)) {
          append(carrier, "remind me to");
          Verb with_poss;
          do {
            with_poss = verb();
            std::erase_if(with_poss.objects,
                          [](const char* o) { return std::string(o).find("{P}") == std::string::npos; });
          } while (with_poss.objects.empty());
          append(content, with_poss.base);
          append(rephrase, with_poss.base);
          object(with_poss, "my", "your", content, rephrase);
        } else {
          append(carrier, replace_name("ask {N}", who));
          wh_question(content, rephrase);
        }
        break;
      }
    }
  }

  void declarative(Words& content, Words& rephrase) {
    Recipient r = recipient();
    if (coin(0.3)) {
      // Recipient as object: "I can pick her up" -> "I can pick you up".
      std::string modal = choose(kModals);
      std::string phrase = choose(kPersonPhrases);
      auto at = phrase.find("{O}");
      append(content, "I " + modal + " " + std::string(phrase).replace(at, 3, r.obj));
      append(rephrase, "I " + modal + " " + phrase.replace(at, 3, "you"));
      return;
    }
    auto [poss, poss_r] = possessive(r);
    switch (pick(4)) {
      case 0: {
        const Verb& v = verb();
        append(content, r.subj + " " + v.s3);
        append(rephrase, std::string("you ") + v.base);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
      case 1: {
        const Verb& v = verb();
        append(content, r.subj + " " + v.past);
        append(rephrase, std::string("you ") + v.past);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
      case 2: {
        const Verb& v = verb();
        std::string modal = choose(kModals);
        append(content, r.subj + " " + modal + " " + v.base);
        append(rephrase, "you " + modal + " " + v.base);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
      default: {
        const Verb& v = dynamic_verb();
        append(content, r.subj + " is " + v.ing);
        append(rephrase, std::string("you are ") + v.ing);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
    }
  }

  void yes_no_question(Words& content, Words& rephrase) {
    Recipient r = recipient();
    auto [poss, poss_r] = possessive(r);
    std::string lead = coin(0.8) ? "if" : "whether";
    switch (pick(7)) {
      case 0: {
        const Verb& v = verb();
        append(content, lead + " " + r.subj + " " + v.s3);
        append(rephrase, std::string("do you ") + v.base);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
      case 1: {
        const Verb& v = verb();
        append(content, lead + " " + r.subj + " " + v.past);
        append(rephrase, std::string("did you ") + v.base);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
      case 2: {
        const Verb& v = verb();
        std::string modal = choose(kModals);
        append(content, lead + " " + r.subj + " " + modal + " " + v.base);
        append(rephrase, modal + " you " + v.base);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
      case 3: {
        const Verb& v = dynamic_verb();
        append(content, lead + " " + r.subj + " is " + v.ing);
        append(rephrase, std::string("are you ") + v.ing);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
      case 4: {
        const Verb& v = verb();
        std::string modal = choose(kModals);
        append(content, lead + " I " + modal + " " + v.base);
        append(rephrase, modal + " I " + v.base);
        object(v, poss, poss_r, content, rephrase);
        break;
      }
      case 5: {
        const Verb& v = verb();
        std::string n = name();
        append(content, lead + " " + n + " " + v.past);
        append(rephrase, "did " + n + " " + v.base);
        object(v, "my", "my", content, rephrase);
        break;
      }
      default: {
        std::string subj = choose(kPluralSubjects);
        std::string adj = choose(kAdjectives);
        append(content, lead + " " + subj + " are " + adj);
        append(rephrase, "are " + subj + " " + adj);
        break;
      }
    }
  }

  void wh_question(Words& content, Words& rephrase) {
    std::string wh = coin(0.5) ? "when" : "where";
    if (coin(0.5)) {
      std::string subj = choose(kWhenSubjects);
      append(content, wh + " " + subj + " is");
      append(rephrase, wh + " is " + subj);
      if (wh == "when") append(alt_, "what time is " + subj);
      return;
    }
    Recipient r = recipient();
    auto [poss, poss_r] = possessive(r);
    const Verb& v = verb();
    std::string modal = choose(kModals);
    append(content, wh + " " + r.subj + " " + modal + " " + v.base);
    append(rephrase, wh + " " + modal + " you " + v.base);
    object(v, poss, poss_r, content, rephrase);
  }

  void make_exact(Words& carrier, Words& content) {
    std::string who = name();
    Words unused;
    switch (pick(5)) {
      case 0: {
        append(carrier, replace_name(coin(0.5) ? "tell {N}" : "text {N}", who));
        const Verb& v = verb();
        append(content, "I " + choose(kModals) + " " + v.base);
        object(v, coin(0.5) ? "my" : "the", "", content, unused);
        break;
      }
      case 1: {
        append(carrier, replace_name("tell {N}", who));
        const Verb& v = dynamic_verb();
        append(content, std::string("I am ") + v.ing);
        object(v, coin(0.5) ? "my" : "the", "", content, unused);
        break;
      }
      case 2: {
        append(carrier, replace_name("tell {N}", who));
        const Verb& v = verb();
        append(content, name() + " " + v.past);
        object(v, coin(0.5) ? "my" : "the", "", content, unused);
        break;
      }
      case 3: {
        append(carrier, replace_name("ask {N}", who));
        const Verb& v = verb();
        if (coin(0.5)) {
          append(content, choose(kModals) + " I " + v.base);
        } else {
          append(content, "did " + name() + " " + v.base);
        }
        object(v, coin(0.5) ? "my" : "the", "", content, unused);
        break;
      }
      default: {
        append(carrier, replace_name("tell {N}", who));
        append(content, choose(kFixedExact));
        break;
      }
    }
  }

  static std::string replace_name(std::string frame, const std::string& n) {
    if (auto at = frame.find("{N}"); at != std::string::npos) frame.replace(at, 3, n);
    return frame;
  }

  std::mt19937_64 rng_;
  Words alt_;
};

}  // namespace

Dataset generate_synthetic(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_synthetic: n must be >= 1");
  Generator gen(seed);
  Dataset ds;
  ds.utterances.reserve(n);
  for (std::size_t k = 0; k < n; ++k) ds.utterances.push_back(gen.next(k, seed));
  return ds;
}

}  // namespace rephrase::corpus
