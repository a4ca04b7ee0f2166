#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "netregime/dates.hpp"

namespace netregime {

/// One ingested news article.
struct ArticleRecord {
  std::string id;
  std::string source;
  Date date;
  std::string text;
};

struct LineError {
  std::size_t line = 0;  // 1-based line number in the input file
  std::string message;
};

struct LoadReport {
  std::vector<ArticleRecord> articles;
  std::vector<LineError> errors;
};

/// Lower-cases ASCII letters, trims, and collapses whitespace runs to a
/// single space. All name matching and duplicate detection runs on this form.
std::string normalize_text(std::string_view text);

/// Canonical person name -> variant spellings.
///
/// Variants are compared in normalized form and must be disjoint across
/// canonical names; each canonical name is registered as a variant of itself.
class AliasTable {
 public:
  /// Registers a variant. Throws ValidationError if the variant already
  /// belongs to a different canonical name or is empty.
  void add(const std::string& canonical, const std::string& variant);

  /// TSV with columns canonical, variant; '#'-prefixed lines are comments.
  static AliasTable from_tsv(const std::filesystem::path& path);

  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }
  std::size_t canonical_count() const { return entries_.size(); }
  bool has_canonical(const std::string& name) const { return entries_.count(name) > 0; }

  /// (normalized variant, canonical) pairs ordered longest variant first.
  const std::vector<std::pair<std::string, std::string>>& match_order() const;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
  std::unordered_map<std::string, std::string> variant_owner_;  // normalized variant -> canonical
  mutable std::vector<std::pair<std::string, std::string>> match_order_;
  mutable bool match_order_dirty_ = true;
};

/// Merged surname list; entries stored lower-cased and deduplicated.
struct SurnameLexicon {
  std::unordered_set<std::string> surnames;

  static SurnameLexicon from_file(const std::filesystem::path& path);
  bool contains(std::string_view surname) const;
};

/// The selected node set, ordered by descending total mention count with
/// lexicographic tie-breaks; index maps each name to its 0-based row.
struct KeyFigureSet {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> index;

  static KeyFigureSet from_ordered_names(std::vector<std::string> ordered);
  int size() const { return static_cast<int>(names.size()); }
};

/// Per-week mention counts keyed by canonical name; weeks are 1..T.
struct MentionTable {
  int n_weeks = 0;
  std::map<std::string, std::vector<long>> counts;

  void add(const std::string& name, int week, long count = 1);
};

/// Reads JSON Lines articles (fields id, source, date, text) and keeps the
/// records dated inside the window, in file order. Malformed or invalid lines
/// are reported, never silently dropped. Throws IoError if the file cannot
/// be read.
LoadReport load_articles(const std::filesystem::path& path, const DateRange& window);

/// Keeps articles whose text contains the keyword (case-insensitive); among
/// exact duplicates (identical normalized text) keeps the earliest-dated one.
std::vector<ArticleRecord> filter_and_dedupe(const std::vector<ArticleRecord>& articles,
                                             const std::string& keyword);

/// Number of token-boundary occurrences of each canonical name's variants in
/// the article text. Longer variants are matched first and their spans
/// consumed, so "Kim Jong Un" is never also counted as a bare "Kim".
std::map<std::string, long> extract_mention_counts(const ArticleRecord& article,
                                                   const SurnameLexicon& lexicon,
                                                   const AliasTable& aliases);

/// Set of canonical names mentioned at least once (set semantics).
std::set<std::string> extract_mentions(const ArticleRecord& article,
                                       const SurnameLexicon& lexicon,
                                       const AliasTable& aliases);

/// Advisory name discovery: runs of two or more capitalized tokens containing
/// a lexicon surname. Used to surface figures missing from the alias table.
std::set<std::string> discover_candidate_names(const ArticleRecord& article,
                                               const SurnameLexicon& lexicon);

/// Names with total count >= min_mentions that appear in at least
/// ceil(min_week_fraction * T) distinct weeks. An empty result is legal.
KeyFigureSet select_key_figures(const MentionTable& table, long min_mentions,
                                double min_week_fraction);

}  // namespace netregime
