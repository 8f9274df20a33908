#include "xlft/codemix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "xlft/error.hpp"
#include "xlft/rng.hpp"

namespace xlft {

void BilingualLexicon::add_language(std::string_view language) {
  by_language_.try_emplace(std::string(language));
}

void BilingualLexicon::add(std::string_view language, const std::string& source,
                           const std::string& target) {
  auto& list = by_language_[std::string(language)][source];
  if (std::find(list.begin(), list.end(), target) == list.end()) list.push_back(target);
}

bool BilingualLexicon::has_language(std::string_view language) const {
  return by_language_.find(language) != by_language_.end();
}

std::vector<std::string> BilingualLexicon::languages() const {
  std::vector<std::string> out;
  for (const auto& [lang, _] : by_language_) out.push_back(lang);
  return out;
}

const std::vector<std::string>* BilingualLexicon::translations(std::string_view language,
                                                               std::string_view source) const {
  auto lit = by_language_.find(language);
  if (lit == by_language_.end()) return nullptr;
  auto it = lit->second.find(std::string(source));
  return it == lit->second.end() ? nullptr : &it->second;
}

std::size_t BilingualLexicon::source_count(std::string_view language) const {
  auto lit = by_language_.find(language);
  return lit == by_language_.end() ? 0 : lit->second.size();
}

const std::map<std::string, std::vector<std::string>>& BilingualLexicon::entries(
    std::string_view language) const {
  auto lit = by_language_.find(language);
  if (lit == by_language_.end()) {
    throw Error(ErrorCategory::precondition, "lexicon has no language '" + std::string(language) + "'");
  }
  return lit->second;
}

void load_lexicon_file(BilingualLexicon& lexicon, std::string_view language,
                       const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  lexicon.add_language(language);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(path.string(), lineno, "expected exactly two tab-separated columns");
    }
    const std::string source = line.substr(0, tab);
    const std::string target = line.substr(tab + 1);
    if (source.empty() || target.empty()) {
      throw ParseError(path.string(), lineno, "empty source or target word");
    }
    lexicon.add(language, source, target);
  }
}

BilingualLexicon load_lexicons(const std::map<std::string, std::filesystem::path>& paths) {
  BilingualLexicon lexicon;
  for (const auto& [lang, path] : paths) load_lexicon_file(lexicon, lang, path);
  return lexicon;
}

void save_lexicon_file(const BilingualLexicon& lexicon, std::string_view language,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  for (const auto& [source, targets] : lexicon.entries(language)) {
    for (const auto& t : targets) out << source << '\t' << t << '\n';
  }
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path.string());
}

void CodeMixConfig::validate() const {
  if (!(select_ratio >= 0.0 && select_ratio <= 1.0)) {
    throw Error(ErrorCategory::config, "codemix: select_ratio must lie in [0, 1]");
  }
  if (languages.empty()) throw Error(ErrorCategory::config, "codemix: no target languages");
}

namespace {

std::string as_single_token(const std::string& translation) {
  std::string out = translation;
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

}  // namespace

std::vector<std::string> code_mix_question(const std::vector<std::string>& tokens,
                                           const BilingualLexicon& lexicon,
                                           const CodeMixConfig& config, std::uint64_t epoch,
                                           std::uint64_t example_id) {
  std::vector<std::string> out = tokens;
  const auto wanted = static_cast<std::size_t>(
      std::lround(config.select_ratio * static_cast<double>(tokens.size())));
  if (wanted == 0) return out;

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& lang : config.languages) {
      if (lexicon.translations(lang, tokens[i])) {
        eligible.push_back(i);
        break;
      }
    }
  }
  const std::size_t n = std::min(wanted, eligible.size());
  RngStream rng(config.seed, "codemix", epoch, example_id);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(eligible[i], eligible[i + rng.index(eligible.size() - i)]);
  }
  std::sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n));

  std::vector<const std::vector<std::string>*> options;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t pos = eligible[s];
    options.clear();
    for (const auto& lang : config.languages) {
      if (const auto* t = lexicon.translations(lang, tokens[pos])) options.push_back(t);
    }
    const auto& chosen = *options[rng.index(options.size())];
    out[pos] = as_single_token(chosen[rng.index(chosen.size())]);
  }
  return out;
}

std::vector<std::string> translate_full(const std::vector<std::string>& tokens,
                                        const BilingualLexicon& lexicon, std::string_view language,
                                        std::optional<std::uint64_t> seed) {
  if (!lexicon.has_language(language)) {
    throw Error(ErrorCategory::precondition, "translate: unknown language '" + std::string(language) + "'");
  }
  std::optional<RngStream> rng;
  if (seed) rng.emplace(*seed, "translate_full");
  std::vector<std::string> out = tokens;
  for (auto& tok : out) {
    const auto* t = lexicon.translations(language, tok);
    if (!t) continue;
    tok = as_single_token(rng ? (*t)[rng->index(t->size())] : t->front());
  }
  return out;
}

}  // namespace xlft
