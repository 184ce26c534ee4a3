// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/prompting.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <mutex>
#include <stdexcept>

#include "frameind/errors.hpp"
#include "frameind/rng.hpp"
#include "frameind/text.hpp"
#include "json.hpp"

namespace frameind {

namespace {

constexpr std::string_view kEnglishFrameNet = R"(The FrameNet frame evoked by "[verb]" in "[sentence]" is)";
constexpr std::string_view kEnglishPlain = R"(The frame evoked by "[verb]" in "[sentence]" is)";
constexpr std::string_view kJapaneseFrameNet = R"("[sentence]" 内の "[verb]" が喚起するFrameNetフレームは)";

constexpr std::string_view kVerbSlot = "[verb]";
constexpr std::string_view kSentenceSlot = "[sentence]";

}  // namespace

PromptTemplate::PromptTemplate(Language language, bool include_framenet_token)
    : language_(language), include_framenet_token_(include_framenet_token) {
  if (language == Language::japanese && !include_framenet_token) {
    throw std::invalid_argument("the Japanese template always names FrameNet");
  }
}

std::string_view PromptTemplate::pattern() const noexcept {
  if (language_ == Language::japanese) return kJapaneseFrameNet;
  return include_framenet_token_ ? kEnglishFrameNet : kEnglishPlain;
}

std::string PromptTemplate::variant_name() const {
  return std::string(to_string(language_)) + (include_framenet_token_ ? "-framenet" : "-plain");
}

std::string PromptTemplate::render(std::string_view verb, std::string_view sentence) const {
  if (verb.empty()) throw std::invalid_argument("render: empty verb");
  if (sentence.empty()) throw std::invalid_argument("render: empty sentence");
  // Single pass over the pattern, so placeholder text inside the arguments is
  // copied verbatim.
  const auto pat = pattern();
  std::string out;
  out.reserve(pat.size() + verb.size() + sentence.size());
  std::size_t i = 0;
  while (i < pat.size()) {
    if (pat.substr(i, kVerbSlot.size()) == kVerbSlot) {
      out.append(verb);
      i += kVerbSlot.size();
    } else if (pat.substr(i, kSentenceSlot.size()) == kSentenceSlot) {
      out.append(sentence);
      i += kSentenceSlot.size();
    } else {
      out.push_back(pat[i++]);
    }
  }
  return out;
}

std::string PromptTemplate::render(const Instance& instance) const {
  return render(instance.target_text(), instance.sentence);
}

Demonstration Demonstration::from_instance(const Instance& instance) {
  if (!instance.gold_frame) {
    throw DataError("demonstration '" + instance.id + "' has no gold frame");
  }
  return Demonstration{instance, *instance.gold_frame};
}

std::size_t approximate_token_count(std::string_view text) { return (text.size() + 3) / 4; }

void IclBudget::validate() const {
  if (max_demo_tokens == 0 || max_demo_tokens > max_total_tokens) {
    throw std::invalid_argument("ICL budget needs 0 < max_demo_tokens <= max_total_tokens");
  }
  if (!counter) throw std::invalid_argument("ICL budget has no token counter");
}

std::string render_demonstration(const PromptTemplate& tmpl, const Demonstration& demo) {
  if (demo.frame_name.empty()) throw std::invalid_argument("demonstration without frame name");
  std::string line = tmpl.render(demo.instance);
  line.push_back(' ');
  line.append(demo.frame_name);
  line.push_back('\n');
  return line;
}

std::string truncate_front(std::string_view text, std::size_t max_tokens,
                           const TokenCounter& counter) {
  if (counter(text) <= max_tokens) return std::string(text);
  std::vector<std::size_t> cuts;
  for (std::size_t pos = 0; pos < text.size(); pos = utf8::next_boundary(text, pos + 1)) {
    cuts.push_back(pos);
  }
  cuts.push_back(text.size());
  // Binary search assumes longer suffixes never count fewer tokens.
  std::size_t lo = 0;
  std::size_t hi = cuts.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (counter(text.substr(cuts[mid])) <= max_tokens) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  while (lo < cuts.size() && counter(text.substr(cuts[lo])) > max_tokens) ++lo;
  return lo < cuts.size() ? std::string(text.substr(cuts[lo])) : std::string();
}

std::string build_icl_prompt(std::span<const Demonstration> demos, const Instance& target,
                             const PromptTemplate& tmpl, const IclBudget& budget) {
  budget.validate();
  std::string prompt;
  for (const auto& demo : demos) prompt += render_demonstration(tmpl, demo);
  prompt += tmpl.render(target);
  return truncate_front(prompt, budget.max_total_tokens, budget.counter);
}

std::vector<Demonstration> sample_demonstrations(const Dataset& train, std::size_t k,
                                                 std::uint64_t seed, const IclBudget& budget,
                                                 const PromptTemplate& tmpl) {
  budget.validate();
  if (k == 0) return {};
  train.require_labels("demonstration sampling");

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "demos"));
  rng.shuffle(order);

  std::vector<Demonstration> picked;
  picked.reserve(k);
  for (std::size_t i : order) {
    auto demo = Demonstration::from_instance(train[i]);
    if (budget.count(render_demonstration(tmpl, demo)) > budget.max_demo_tokens) continue;
    picked.push_back(std::move(demo));
    if (picked.size() == k) return picked;
  }
  throw DataError("only " + std::to_string(picked.size()) + " of " +
                  std::to_string(train.size()) + " training instances fit the " +
                  std::to_string(budget.max_demo_tokens) + "-token demonstration budget; " +
                  std::to_string(k) + " requested");
}

// ---------------------------------------------------------------------------

namespace {

class TokenCounterProcess {
 public:
  explicit TokenCounterProcess(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw std::runtime_error("token counter: pipe failed");
    if (pipe(from_child) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw std::runtime_error("token counter: pipe failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw std::runtime_error("token counter: fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    to_ = fdopen(to_child[1], "w");
    from_ = fdopen(from_child[0], "r");
    if (to_ == nullptr || from_ == nullptr) throw std::runtime_error("token counter: fdopen failed");
  }

  TokenCounterProcess(const TokenCounterProcess&) = delete;
  TokenCounterProcess& operator=(const TokenCounterProcess&) = delete;

  ~TokenCounterProcess() {
    if (to_ != nullptr) fclose(to_);
    if (from_ != nullptr) fclose(from_);
    if (pid_ > 0) waitpid(pid_, nullptr, 0);
  }

  std::size_t count(std::string_view text) {
    std::lock_guard lock(mutex_);
    const std::string request = nlohmann::json(std::string(text)).dump() + "\n";
    if (std::fwrite(request.data(), 1, request.size(), to_) != request.size() ||
        std::fflush(to_) != 0) {
      throw std::runtime_error("token counter: write to child failed");
    }
    char buffer[64];
    if (std::fgets(buffer, sizeof buffer, from_) == nullptr) {
      throw std::runtime_error("token counter: child closed its output");
    }
    char* end = nullptr;
    const unsigned long long n = std::strtoull(buffer, &end, 10);
    if (end == buffer) throw std::runtime_error("token counter: malformed reply");
    return static_cast<std::size_t>(n);
  }

 private:
  pid_t pid_ = -1;
  FILE* to_ = nullptr;
  FILE* from_ = nullptr;
  std::mutex mutex_;
};

}  // namespace

TokenCounter make_subprocess_token_counter(const std::string& command) {
  // A dead child must surface as an exception, not a SIGPIPE.
  signal(SIGPIPE, SIG_IGN);
  auto process = std::make_shared<TokenCounterProcess>(command);
  return [process](std::string_view text) { return process->count(text); };
}

}  // namespace frameind
