#include "grammar.hpp"

#include <set>
#include <sstream>

namespace topdep::testing {

namespace {

std::vector<std::string> words_of(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Pronounceable nonsense words; the set keeps them distinct across slots.
std::vector<std::string> pseudo_words(Rng& rng, int count, std::set<std::string>& taken) {
  static const char* const onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* const vowels[] = {"a", "e", "i", "o", "u"};
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    std::string w;
    const int syllables = uniform_int(rng, 2, 3);
    for (int s = 0; s < syllables; ++s) {
      w += onsets[uniform_int(rng, 0, 13)];
      w += vowels[uniform_int(rng, 0, 4)];
    }
    if (taken.insert(w).second) out.push_back(w);
  }
  return out;
}

}  // namespace

SyntheticGrammar::SyntheticGrammar(std::uint64_t lexicon_seed, int fillers_per_slot) {
  auto add = [](std::vector<Template>& to, const std::string& intent, const std::string& text) {
    to.push_back({intent, words_of(text)});
  };
  add(top_level_, "IN:GET_WEATHER", "what is the weather in {SL:LOCATION}");
  add(top_level_, "IN:GET_WEATHER", "weather {SL:DATE_TIME} in {SL:LOCATION}");
  add(top_level_, "IN:GET_WEATHER", "will it rain {SL:DATE_TIME}");
  add(top_level_, "IN:GET_WEATHER", "forecast for {SL:LOCATION} {SL:DATE_TIME}");
  add(top_level_, "IN:GET_WEATHER", "is it cold in {SL:LOCATION} {SL:DATE_TIME} or {SL:DATE_TIME}");
  add(top_level_, "IN:CREATE_REMINDER", "remind me to {SL:TODO} {SL:DATE_TIME}");
  add(top_level_, "IN:CREATE_REMINDER", "set a reminder to {SL:TODO}");
  add(top_level_, "IN:CREATE_REMINDER", "{SL:DATE_TIME} remind me to {SL:TODO}");
  add(top_level_, "IN:GET_DIRECTIONS", "directions to {SL:DESTINATION}");
  add(top_level_, "IN:GET_DIRECTIONS", "how do i get to {SL:DESTINATION} {SL:DATE_TIME}");
  add(top_level_, "IN:GET_DIRECTIONS", "navigate to {SL:DESTINATION} from {SL:SOURCE}");
  add(top_level_, "IN:GET_EVENT", "any {SL:CATEGORY} events {SL:DATE_TIME}");
  add(top_level_, "IN:GET_EVENT", "what {SL:CATEGORY} is {SL:ORGANIZER} hosting");
  add(top_level_, "IN:GET_EVENT", "{SL:CATEGORY} near {SL:LOCATION} {SL:DATE_TIME}");
  add(nested_event_, "IN:GET_EVENT", "{SL:ORGANIZER} 's {SL:CATEGORY}");
  add(nested_event_, "IN:GET_EVENT", "the {SL:CATEGORY} {SL:DATE_TIME}");

  Rng rng(lexicon_seed);
  std::set<std::string> taken;
  for (const auto& t : top_level_) taken.insert(t.items.begin(), t.items.end());
  for (const auto& t : nested_event_) taken.insert(t.items.begin(), t.items.end());

  auto singles = [](const std::vector<std::string>& words) {
    std::vector<std::vector<std::string>> out;
    for (const auto& w : words) out.push_back({w});
    return out;
  };
  std::vector<std::vector<std::string>> locations = singles(pseudo_words(rng, fillers_per_slot, taken));
  for (int i = 0; i < fillers_per_slot / 4; ++i) {
    locations[static_cast<std::size_t>(i)].insert(locations[static_cast<std::size_t>(i)].begin(), "new");
  }
  std::vector<std::vector<std::string>> dates;
  for (const char* day : {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"}) {
    dates.push_back({day});
    dates.push_back({"next", day});
    dates.push_back({"on", day});
  }
  for (const char* rel : {"today", "tomorrow", "tonight"}) dates.push_back({rel});
  for (const char* when : {"weekend", "morning", "evening", "week"}) dates.push_back({"this", when});
  std::vector<std::vector<std::string>> todos;
  const auto verbs = pseudo_words(rng, 8, taken);
  const auto objects = pseudo_words(rng, fillers_per_slot / 4, taken);
  for (std::size_t v = 0; v < verbs.size(); ++v) {
    for (std::size_t o = v % 2; o < objects.size(); o += 2) todos.push_back({verbs[v], objects[o]});
  }
  fillers_ = {
      {"SL:LOCATION", locations},
      {"SL:SOURCE", locations},
      {"SL:DESTINATION", locations},
      {"SL:DATE_TIME", dates},
      {"SL:TODO", todos},
      {"SL:ORGANIZER", singles(pseudo_words(rng, fillers_per_slot, taken))},
      {"SL:CATEGORY", singles(pseudo_words(rng, fillers_per_slot, taken))},
  };
}

std::vector<std::string> SyntheticGrammar::intents() const {
  std::set<std::string> out;
  for (const auto& t : top_level_) out.insert(t.intent);
  return {out.begin(), out.end()};
}

std::vector<std::string> SyntheticGrammar::slots() const {
  std::vector<std::string> out;
  for (const auto& [name, list] : fillers_) out.push_back(name);
  return out;
}

void SyntheticGrammar::fill(Rng& rng, const std::string& slot, TopNode& node,
                            std::vector<std::string>& tokens) const {
  if (slot == "SL:DESTINATION" && uniform_int(rng, 0, 1) == 0) {
    const auto& t = nested_event_[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(nested_event_.size()) - 1))];
    node.children.push_back(TopNode::symbol(t.intent));
    expand(rng, t, node.children.back(), tokens);
    return;
  }
  for (const auto& [name, list] : fillers_) {
    if (name != slot) continue;
    const auto& words = list[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(list.size()) - 1))];
    for (const auto& w : words) {
      node.children.push_back(TopNode::token(tokens.size(), w));
      tokens.push_back(w);
    }
    return;
  }
}

void SyntheticGrammar::expand(Rng& rng, const Template& t, TopNode& node,
                              std::vector<std::string>& tokens) const {
  for (const auto& item : t.items) {
    if (item.size() > 2 && item.front() == '{') {
      const std::string slot = item.substr(1, item.size() - 2);
      node.children.push_back(TopNode::symbol(slot));
      fill(rng, slot, node.children.back(), tokens);
    } else {
      node.children.push_back(TopNode::token(tokens.size(), item));
      tokens.push_back(item);
    }
  }
}

GrammarSample SyntheticGrammar::sample(Rng& rng) const {
  const auto& t = top_level_[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(top_level_.size()) - 1))];
  GrammarSample out{{}, TopTree{TopNode::symbol(t.intent)}};
  expand(rng, t, out.tree.root, out.tokens);
  return out;
}

std::vector<GrammarSample> SyntheticGrammar::sample(Rng& rng, std::size_t count) const {
  std::vector<GrammarSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample(rng));
  return out;
}

}  // namespace topdep::testing
