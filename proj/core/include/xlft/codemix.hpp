#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xlft {

// Per target language, source word -> translations (file order, no duplicates).
class BilingualLexicon {
 public:
  void add_language(std::string_view language);
  void add(std::string_view language, const std::string& source, const std::string& target);

  bool has_language(std::string_view language) const;
  std::vector<std::string> languages() const;
  const std::vector<std::string>* translations(std::string_view language,
                                               std::string_view source) const;
  // Number of distinct source words with a translation into `language`.
  std::size_t source_count(std::string_view language) const;
  const std::map<std::string, std::vector<std::string>>& entries(std::string_view language) const;

 private:
  std::map<std::string, std::map<std::string, std::vector<std::string>>, std::less<>> by_language_;
};

// One MUSE-style dictionary: "source<TAB>target" per line.
void load_lexicon_file(BilingualLexicon& lexicon, std::string_view language,
                       const std::filesystem::path& path);
BilingualLexicon load_lexicons(const std::map<std::string, std::filesystem::path>& paths);
void save_lexicon_file(const BilingualLexicon& lexicon, std::string_view language,
                       const std::filesystem::path& path);

struct CodeMixConfig {
  // Fraction of question words to replace.
  double select_ratio = 0.3;
  std::vector<std::string> languages;
  std::uint64_t seed = 0;

  void validate() const;
};

// Replaces round(select_ratio * len) words, drawn without replacement from the
// positions whose word has a translation in at least one configured language.
// Each chosen word gets a uniformly drawn language among those that translate
// it and a uniformly drawn translation. Draws depend only on
// (seed, epoch, example_id). Multi-word translations are joined with '_'.
std::vector<std::string> code_mix_question(const std::vector<std::string>& tokens,
                                           const BilingualLexicon& lexicon,
                                           const CodeMixConfig& config, std::uint64_t epoch,
                                           std::uint64_t example_id);

// Replaces every word that has a translation into `language`: the first one,
// or a seeded uniform draw when `seed` is given.
std::vector<std::string> translate_full(const std::vector<std::string>& tokens,
                                        const BilingualLexicon& lexicon, std::string_view language,
                                        std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace xlft
