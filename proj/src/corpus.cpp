#include "llmdet/corpus.hpp"

#include <fstream>
#include <map>

#include "llmdet/error.hpp"
#include "llmdet/rng.hpp"
#include "llmdet/tokenizer.hpp"

namespace llmdet {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  return out;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  for (const auto& l : lines) f << l << '\n';
  if (!f) throw Error("failed writing " + path);
}

namespace {

using Words = std::vector<std::string>;

struct Topic {
  Words nouns;
  Words verbs;
  Words adjectives;
  Words places;
  // Relative template weights; the same grammar with different habits.
  std::vector<double> template_weights;
};

const Words kSharedVerbs{"found", "made", "took", "saw", "used", "kept", "needed", "showed"};
const Words kSharedAdjectives{"new", "old", "small", "large", "good", "long"};
const Words kPreps{"in", "on", "near", "with", "for", "from"};

const std::map<std::string, Topic>& topics() {
  static const std::map<std::string, Topic> t{
      {"human",
       {{"neighbor", "family", "friend", "teacher", "child", "dog", "garden", "letter", "dinner",
         "weekend", "story", "holiday", "bicycle", "window", "question", "answer", "morning",
         "evening", "book", "song"},
        {"visited", "called", "remembered", "wrote", "laughed", "asked", "walked", "shared",
         "enjoyed", "painted"},
        {"busy", "quiet", "friendly", "tired", "happy", "rainy", "honest", "funny", "warm",
         "simple"},
        {"park", "street", "house", "school", "library", "village", "market", "porch"},
        {3, 2, 2, 2, 1, 2}}},
      {"science",
       {{"experiment", "molecule", "protein", "telescope", "cell", "sample", "theory", "galaxy",
         "electron", "reaction", "enzyme", "signal", "genome", "crystal", "particle", "neuron",
         "laser", "isotope", "catalyst", "spectrum"},
        {"measured", "observed", "isolated", "synthesized", "detected", "analyzed", "modeled",
         "calibrated", "replicated", "cooled"},
        {"stable", "quantum", "organic", "thermal", "magnetic", "precise", "cellular",
         "spectral", "dense", "radioactive"},
        {"laboratory", "observatory", "reactor", "chamber", "institute", "orbit", "microscope",
         "vacuum"},
        {1, 3, 2, 1, 3, 1}}},
      {"sports",
       {{"striker", "goalkeeper", "coach", "referee", "team", "match", "season", "league",
         "trophy", "penalty", "tournament", "defender", "captain", "fans", "stadium", "goal",
         "sprinter", "medal", "championship", "transfer"},
        {"scored", "defeated", "trained", "tackled", "celebrated", "substituted", "won", "lost",
         "sprinted", "blocked"},
        {"fierce", "unbeaten", "injured", "decisive", "athletic", "crowded", "relegated",
         "aggressive", "young", "veteran"},
        {"arena", "pitch", "field", "court", "track", "gym", "locker", "dugout"},
        {2, 1, 3, 3, 1, 1}}},
      {"cooking",
       {{"chef", "sauce", "onion", "garlic", "oven", "recipe", "butter", "flour", "pan", "soup",
         "pastry", "spice", "basil", "tomato", "dough", "broth", "knife", "salad", "lemon",
         "cheese"},
        {"chopped", "simmered", "baked", "seasoned", "whisked", "roasted", "stirred", "grilled",
         "tasted", "kneaded"},
        {"crispy", "savory", "fresh", "golden", "spicy", "tender", "creamy", "sweet", "smoky",
         "bitter"},
        {"kitchen", "bakery", "restaurant", "pantry", "grill", "stove", "bistro", "cellar"},
        {2, 2, 1, 2, 2, 3}}},
      {"travel",
       {{"traveler", "passport", "ferry", "hostel", "itinerary", "guide", "luggage", "flight",
         "harbor", "map", "tourist", "ticket", "border", "souvenir", "train", "island", "castle",
         "museum", "cathedral", "canyon"},
        {"explored", "booked", "crossed", "wandered", "boarded", "hiked", "toured", "packed",
         "photographed", "departed"},
        {"remote", "scenic", "ancient", "coastal", "bustling", "foreign", "mountainous",
         "colorful", "historic", "sunny"},
        {"airport", "station", "coast", "valley", "city", "desert", "border", "resort"},
        {1, 2, 2, 1, 3, 2}}},
  };
  return t;
}

// Zipf-like choice: earlier words are more common.
const std::string& pick(Rng& rng, const Words& words) {
  double total = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) total += 1.0 / static_cast<double>(i + 1);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < words.size(); ++i) {
    u -= 1.0 / static_cast<double>(i + 1);
    if (u < 0) return words[i];
  }
  return words.back();
}

const std::string& pick_mixed(Rng& rng, const Words& topical, const Words& shared) {
  return rng.uniform() < 0.25 ? pick(rng, shared) : pick(rng, topical);
}

std::string sentence(Rng& rng, const Topic& t) {
  auto noun = [&] { return pick(rng, t.nouns); };
  auto verb = [&] { return pick_mixed(rng, t.verbs, kSharedVerbs); };
  auto adj = [&] { return pick_mixed(rng, t.adjectives, kSharedAdjectives); };
  auto place = [&] { return pick(rng, t.places); };
  auto prep = [&] { return pick(rng, kPreps); };

  double total = 0.0;
  for (double w : t.template_weights) total += w;
  double u = rng.uniform() * total;
  std::size_t which = 0;
  for (; which + 1 < t.template_weights.size(); ++which) {
    u -= t.template_weights[which];
    if (u < 0) break;
  }
  switch (which) {
    case 0:
      return "the " + adj() + " " + noun() + " " + verb() + " the " + noun() + " .";
    case 1:
      return "a " + noun() + " " + verb() + " " + prep() + " the " + adj() + " " + place() + " .";
    case 2:
      return "in the " + place() + " , the " + noun() + " " + verb() + " a " + adj() + " " + noun() + " .";
    case 3:
      return "the " + noun() + " and the " + noun() + " " + verb() + " " + prep() + " the " + place() + " .";
    case 4:
      return "this " + adj() + " " + noun() + " was " + adj() + " and " + adj() + " .";
    default:
      return "after the " + noun() + " " + verb() + " , the " + noun() + " " + verb() + " " +
             prep() + " the " + place() + " .";
  }
}

}  // namespace

const std::vector<std::string>& builtin_corpus_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, _] : topics()) n.push_back(k);
    return n;
  }();
  return names;
}

std::vector<std::string> builtin_corpus(const std::string& topic, std::size_t docs,
                                        std::uint64_t seed) {
  auto it = topics().find(topic);
  if (it == topics().end()) throw Error("unknown built-in corpus '" + topic + "'");
  Rng rng(derive_seed(seed, fnv1a64(topic)));
  std::vector<std::string> out;
  out.reserve(docs);
  for (std::size_t d = 0; d < docs; ++d) {
    const std::size_t sentences = 2 + rng.below(3);
    std::string doc;
    for (std::size_t s = 0; s < sentences; ++s) {
      if (s) doc += ' ';
      doc += sentence(rng, it->second);
    }
    out.push_back(std::move(doc));
  }
  return out;
}

std::vector<std::string> load_corpus(const std::string& spec, std::size_t builtin_docs,
                                     std::uint64_t seed) {
  constexpr std::string_view kPrefix = "builtin:";
  if (spec.rfind(kPrefix, 0) == 0) return builtin_corpus(spec.substr(kPrefix.size()), builtin_docs, seed);
  return read_lines(spec);
}

}  // namespace llmdet
