// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "frameind/errors.hpp"
#include "frameind/prompting.hpp"
#include "frameind/text.hpp"
#include "support/fixtures.hpp"

using namespace frameind;

namespace {

Instance make(const std::string& id, const std::string& sentence, const std::string& verb,
              std::optional<std::string> frame = std::nullopt, Language lang = Language::english) {
  Instance inst;
  inst.id = id;
  inst.lemma = verb;
  inst.sentence = sentence;
  const auto at = sentence.find(verb);
  inst.target = {utf8::length(sentence.substr(0, at)),
                 utf8::length(sentence.substr(0, at)) + utf8::length(verb)};
  inst.gold_frame = std::move(frame);
  inst.language = lang;
  return inst;
}

Dataset demo_pool(std::size_t n, std::size_t long_every = 0) {
  std::vector<Instance> v;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s = "Sentence " + std::to_string(i) + " where we ran.";
    if (long_every && i % long_every == 0) s = std::string(9000, 'x') + " ran.";
    v.push_back(make("d" + std::to_string(i), s, "ran", "Frame_" + std::to_string(i % 3)));
  }
  return Dataset("pool", std::move(v));
}

}  // namespace

TEST_CASE("templates render the three variants") {
  const Instance lost = make("t", "He lost the gold medal by just .02 points.", "lost");
  CHECK(PromptTemplate().render(lost) ==
        R"(The FrameNet frame evoked by "lost" in "He lost the gold medal by just .02 points." is)");
  CHECK(PromptTemplate(Language::english, false).render(lost) ==
        R"(The frame evoked by "lost" in "He lost the gold medal by just .02 points." is)");
  CHECK(PromptTemplate(Language::japanese).render("逃した", "彼は逃した。") ==
        "\"彼は逃した。\" 内の \"逃した\" が喚起するFrameNetフレームは");
  CHECK(PromptTemplate(Language::english, false).variant_name() == "en-plain");
  CHECK(PromptTemplate(Language::japanese).variant_name() == "ja-framenet");
  CHECK_THROWS_AS(PromptTemplate(Language::japanese, false), std::invalid_argument);
  CHECK_THROWS_AS(PromptTemplate().render("", "x"), std::invalid_argument);
  // Placeholder text inside the inputs is not expanded again.
  CHECK(PromptTemplate().render("[sentence]", "a [verb] b") ==
        R"(The FrameNet frame evoked by "[sentence]" in "a [verb] b" is)");
}

TEST_CASE("golden prompt files match byte for byte") {
  const std::filesystem::path dir = std::filesystem::path(FRAMEIND_TEST_DATA) / "golden" / "prompts";
  const auto cases = nlohmann::json::parse(fixtures::slurp(dir / "cases.json"));
  REQUIRE(cases.size() == 6);
  for (const auto& c : cases) {
    auto parse = [](const nlohmann::json& j) {
      std::istringstream line(j.dump());
      return parse_instances(line)[0];
    };
    std::vector<Demonstration> demos;
    for (const auto& d : c["demos"]) demos.push_back(Demonstration::from_instance(parse(d)));
    const PromptTemplate tmpl(parse_language(c["language"].get<std::string>()),
                              c["framenet_token"].get<bool>());
    CAPTURE(c["file"].get<std::string>());
    CHECK(build_icl_prompt(demos, parse(c["target"]), tmpl, IclBudget{}) ==
          fixtures::slurp(dir / c["file"].get<std::string>()));
  }
}

TEST_CASE("demonstration lines and assembly") {
  const PromptTemplate tmpl;
  const auto demo = Demonstration::from_instance(make("d", "He lost his keys.", "lost", "Losing"));
  CHECK(render_demonstration(tmpl, demo) ==
        "The FrameNet frame evoked by \"lost\" in \"He lost his keys.\" is Losing\n");
  CHECK_THROWS_AS(Demonstration::from_instance(make("u", "He lost.", "lost")), DataError);
  const Instance target = make("t", "She won.", "won");
  const std::vector<Demonstration> demos{demo, demo};
  const std::string p = build_icl_prompt(demos, target, tmpl, IclBudget{});
  CHECK(p == render_demonstration(tmpl, demo) + render_demonstration(tmpl, demo) + tmpl.render(target));
}

TEST_CASE("front truncation keeps the tail within budget on a UTF-8 boundary") {
  CHECK(approximate_token_count("") == 0);
  CHECK(approximate_token_count("abcd") == 1);
  CHECK(approximate_token_count("abcde") == 2);
  const std::string text = "日本語のテキスト" + std::string(40, 'a');
  for (std::size_t budget = 1; budget < 20; ++budget) {
    const std::string cut = truncate_front(text, budget, approximate_token_count);
    CHECK(approximate_token_count(cut) <= budget);
    CHECK(utf8::is_valid(cut));
    CHECK(text.ends_with(cut));
    // Shortest removal: one more code point would not fit.
    const auto start = text.size() - cut.size();
    if (start > 0) {
      std::size_t prev = start - 1;
      while (prev > 0 && (static_cast<unsigned char>(text[prev]) & 0xC0) == 0x80) --prev;
      CHECK(approximate_token_count(std::string_view(text).substr(prev)) > budget);
    }
  }
  CHECK(truncate_front("short", 100, approximate_token_count) == "short");

  IclBudget small;
  small.max_total_tokens = 10;
  small.max_demo_tokens = 10;
  const auto demo = Demonstration::from_instance(make("d", "He lost his keys.", "lost", "Losing"));
  const std::vector<Demonstration> demos{demo};
  const std::string p = build_icl_prompt(demos, make("t", "She won.", "won"), PromptTemplate(), small);
  CHECK(approximate_token_count(p) <= 10);
  CHECK(p.ends_with("\"She won.\" is"));
}

TEST_CASE("budget validation") {
  IclBudget b;
  CHECK_NOTHROW(b.validate());
  b.max_demo_tokens = 3000;
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);
  b.max_demo_tokens = 0;
  CHECK_THROWS_AS(b.validate(), std::invalid_argument);
}

TEST_CASE("demonstration sampling") {
  const PromptTemplate tmpl;
  const Dataset pool = demo_pool(30);
  const auto a = sample_demonstrations(pool, 5, 11, IclBudget{}, tmpl);
  const auto b = sample_demonstrations(pool, 5, 11, IclBudget{}, tmpl);
  const auto c = sample_demonstrations(pool, 5, 12, IclBudget{}, tmpl);
  REQUIRE(a.size() == 5);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a[i].instance.id == b[i].instance.id);
    ids.insert(a[i].instance.id);
  }
  CHECK(ids.size() == 5);
  bool differs = false;
  for (std::size_t i = 0; i < 5; ++i) differs |= a[i].instance.id != c[i].instance.id;
  CHECK(differs);

  // Over-budget candidates are replaced.
  const Dataset mixed = demo_pool(30, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& d : sample_demonstrations(mixed, 10, seed, IclBudget{}, tmpl)) {
      CHECK(approximate_token_count(render_demonstration(tmpl, d)) <= 1900);
    }
  }
  CHECK_THROWS_AS(sample_demonstrations(mixed, 16, 0, IclBudget{}, tmpl), DataError);
  CHECK(sample_demonstrations(pool, 0, 0, IclBudget{}, tmpl).empty());
}

TEST_CASE("subprocess token counter speaks the line protocol") {
  const TokenCounter count = make_subprocess_token_counter(FRAMEIND_WORD_COUNTER);
  CHECK(count("") == 0);
  CHECK(count("one two three") == 3);
  CHECK(count("line\nbreak \"quoted\" 日本 語") == 5);
  const TokenCounter copy = count;
  CHECK(copy("a b") == 2);

  CHECK(truncate_front("a b c d e f g h", 6, count) == " c d e f g h");

  const TokenCounter broken = make_subprocess_token_counter("exit 0");
  CHECK_THROWS_AS(broken("text"), std::runtime_error);
}
