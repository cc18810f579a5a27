#pragma once

// A small compositional intent/slot grammar for end-to-end learning checks.
// Four intents, seven slots; a destination can hold a nested event intent, so
// the deepest symbol sits three levels below the root intent.

#include <cstdint>
#include <string>
#include <vector>

#include "generators.hpp"
#include "topdep/top_tree.hpp"

namespace topdep::testing {

struct GrammarSample {
  std::vector<std::string> tokens;
  TopTree tree;
};

class SyntheticGrammar {
 public:
  /// `lexicon_seed` fixes the filler vocabulary.
  explicit SyntheticGrammar(std::uint64_t lexicon_seed = 7, int fillers_per_slot = 40);

  GrammarSample sample(Rng& rng) const;
  std::vector<GrammarSample> sample(Rng& rng, std::size_t count) const;

  std::vector<std::string> intents() const;
  std::vector<std::string> slots() const;

 private:
  struct Template {
    std::string intent;
    std::vector<std::string> items;  // words, or "{SL:NAME}" placeholders
  };

  void expand(Rng& rng, const Template& t, TopNode& node, std::vector<std::string>& tokens) const;
  void fill(Rng& rng, const std::string& slot, TopNode& node, std::vector<std::string>& tokens) const;

  std::vector<Template> top_level_;
  std::vector<Template> nested_event_;
  std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> fillers_;
};

}  // namespace topdep::testing
