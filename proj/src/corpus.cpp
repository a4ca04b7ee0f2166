#include "netregime/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "netregime/errors.hpp"

namespace netregime {

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

void AliasTable::add(const std::string& canonical, const std::string& variant) {
  if (trim(canonical).empty()) throw ValidationError("alias table: empty canonical name");
  if (trim(variant).empty()) {
    throw ValidationError("alias table: empty variant for '" + canonical + "'");
  }
  // First sight of a canonical registers the name itself as a variant.
  if (entries_.find(canonical) == entries_.end()) {
    entries_[canonical] = {};
    const std::string self = normalize_text(canonical);
    auto it = variant_owner_.find(self);
    if (it != variant_owner_.end() && it->second != canonical) {
      throw ValidationError("alias table: variant '" + canonical +
                            "' already maps to '" + it->second + "'");
    }
    if (it == variant_owner_.end()) {
      variant_owner_[self] = canonical;
      entries_[canonical].push_back(canonical);
    }
    match_order_dirty_ = true;
  }
  const std::string norm = normalize_text(variant);
  auto it = variant_owner_.find(norm);
  if (it != variant_owner_.end()) {
    if (it->second != canonical) {
      throw ValidationError("alias table: variant '" + variant + "' maps to both '" +
                            it->second + "' and '" + canonical + "'");
    }
    return;  // duplicate re-registration of the same pair
  }
  variant_owner_[norm] = canonical;
  entries_[canonical].push_back(variant);
  match_order_dirty_ = true;
}

AliasTable AliasTable::from_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alias table: " + path.string());
  AliasTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError("alias table " + path.string() + ":" +
                            std::to_string(lineno) + ": expected canonical<TAB>variant");
    }
    table.add(trim(line.substr(0, tab)), trim(line.substr(tab + 1)));
  }
  return table;
}

const std::vector<std::pair<std::string, std::string>>& AliasTable::match_order() const {
  if (match_order_dirty_) {
    match_order_.clear();
    for (const auto& [variant, canonical] : variant_owner_) {
      match_order_.emplace_back(variant, canonical);
    }
    std::sort(match_order_.begin(), match_order_.end(),
              [](const auto& a, const auto& b) {
                if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
                return a.first < b.first;
              });
    match_order_dirty_ = false;
  }
  return match_order_;
}

SurnameLexicon SurnameLexicon::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open surname lexicon: " + path.string());
  SurnameLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    lex.surnames.insert(lower(t));
  }
  return lex;
}

bool SurnameLexicon::contains(std::string_view surname) const {
  return surnames.count(lower(surname)) > 0;
}

KeyFigureSet KeyFigureSet::from_ordered_names(std::vector<std::string> ordered) {
  KeyFigureSet set;
  set.names = std::move(ordered);
  for (std::size_t i = 0; i < set.names.size(); ++i) {
    const auto [it, fresh] = set.index.emplace(set.names[i], static_cast<int>(i));
    if (!fresh) throw ValidationError("duplicate key figure name: " + set.names[i]);
  }
  return set;
}

void MentionTable::add(const std::string& name, int week, long count) {
  if (week < 1 || week > n_weeks) {
    throw ValidationError("mention table: week " + std::to_string(week) +
                          " outside 1.." + std::to_string(n_weeks));
  }
  auto& row = counts[name];
  if (row.empty()) row.assign(n_weeks, 0);
  row[week - 1] += count;
}

LoadReport load_articles(const std::filesystem::path& path, const DateRange& window) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open article file: " + path.string());
  LoadReport report;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      report.errors.push_back({lineno, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    std::string missing;
    for (const char* field : {"id", "source", "date", "text"}) {
      if (!obj.contains(field) || !obj[field].is_string()) {
        missing = field;
        break;
      }
    }
    if (!missing.empty()) {
      report.errors.push_back({lineno, "missing or non-string field '" + missing + "'"});
      continue;
    }
    ArticleRecord rec;
    rec.id = obj["id"].get<std::string>();
    rec.source = obj["source"].get<std::string>();
    rec.text = obj["text"].get<std::string>();
    try {
      rec.date = parse_date(obj["date"].get<std::string>());
    } catch (const ValidationError& e) {
      report.errors.push_back({lineno, e.what()});
      continue;
    }
    if (trim(rec.text).empty()) {
      report.errors.push_back({lineno, "empty article text (id '" + rec.id + "')"});
      continue;
    }
    if (!seen_ids.insert(rec.id).second) {
      report.errors.push_back({lineno, "duplicate article id '" + rec.id + "'"});
      continue;
    }
    if (!window.contains(rec.date)) continue;
    report.articles.push_back(std::move(rec));
  }
  return report;
}

std::vector<ArticleRecord> filter_and_dedupe(const std::vector<ArticleRecord>& articles,
                                             const std::string& keyword) {
  if (keyword.empty()) throw ValidationError("filter keyword must be non-empty");
  const std::string needle = lower(keyword);

  std::vector<ArticleRecord> kept;
  // normalized text -> position in `kept` holding the current earliest copy
  std::unordered_map<std::string, std::size_t> first_copy;
  for (const auto& art : articles) {
    if (lower(art.text).find(needle) == std::string::npos) continue;
    const std::string norm = normalize_text(art.text);
    auto it = first_copy.find(norm);
    if (it == first_copy.end()) {
      first_copy[norm] = kept.size();
      kept.push_back(art);
    } else if (art.date < kept[it->second].date) {
      kept[it->second] = art;
    }
  }
  return kept;
}

namespace {

// Token-boundary occurrences of `needle` in `haystack` that do not overlap
// already-consumed spans. Marks every such occurrence consumed.
long match_and_consume(const std::string& haystack, const std::string& needle,
                       std::vector<char>& consumed) {
  long found = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    const std::size_t end = pos + needle.size();
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) {
      bool overlap = false;
      for (std::size_t i = pos; i < end; ++i) {
        if (consumed[i]) {
          overlap = true;
          break;
        }
      }
      if (!overlap) {
        std::fill(consumed.begin() + pos, consumed.begin() + end, 1);
        ++found;
      }
    }
    ++pos;
  }
  return found;
}

}  // namespace

std::map<std::string, long> extract_mention_counts(const ArticleRecord& article,
                                                   const SurnameLexicon& lexicon,
                                                   const AliasTable& aliases) {
  if (lexicon.surnames.empty()) throw ValidationError("surname lexicon is empty");
  if (aliases.canonical_count() == 0) throw ValidationError("alias table is empty");
  const std::string text = normalize_text(article.text);
  std::vector<char> consumed(text.size(), 0);
  std::map<std::string, long> counts;
  for (const auto& [variant, canonical] : aliases.match_order()) {
    const long n = match_and_consume(text, variant, consumed);
    if (n > 0) counts[canonical] += n;
  }
  return counts;
}

std::set<std::string> extract_mentions(const ArticleRecord& article,
                                       const SurnameLexicon& lexicon,
                                       const AliasTable& aliases) {
  std::set<std::string> out;
  for (const auto& [name, count] : extract_mention_counts(article, lexicon, aliases)) {
    out.insert(name);
  }
  return out;
}

std::set<std::string> discover_candidate_names(const ArticleRecord& article,
                                               const SurnameLexicon& lexicon) {
  std::set<std::string> out;
  std::vector<std::string> run;
  bool run_has_surname = false;

  auto flush = [&] {
    if (run.size() >= 2 && run_has_surname) {
      std::string joined;
      for (const auto& tok : run) {
        if (!joined.empty()) joined.push_back(' ');
        joined += tok;
      }
      out.insert(joined);
    }
    run.clear();
    run_has_surname = false;
  };

  std::string token;
  auto end_token = [&] {
    if (token.empty()) return;
    const bool capitalized = std::isupper(static_cast<unsigned char>(token[0])) != 0;
    if (capitalized) {
      std::string bare = token;
      while (!bare.empty() && !is_word_char(bare.back())) bare.pop_back();
      if (lexicon.contains(bare)) run_has_surname = true;
      run.push_back(token);
    } else {
      flush();
    }
    token.clear();
  };

  for (char c : article.text) {
    if (is_word_char(c) || c == '.' || c == '-' || c == '\'') {
      token.push_back(c);
    } else {
      end_token();
      if (std::isspace(static_cast<unsigned char>(c)) == 0) flush();
    }
  }
  end_token();
  flush();
  return out;
}

KeyFigureSet select_key_figures(const MentionTable& table, long min_mentions,
                                double min_week_fraction) {
  if (table.n_weeks < 1) throw ValidationError("mention table has no weeks");
  if (min_mentions < 1) throw ValidationError("min_mentions must be >= 1");
  if (!(min_week_fraction > 0.0) || min_week_fraction > 1.0) {
    throw ValidationError("min_week_fraction must be in (0, 1]");
  }
  const long needed_weeks = static_cast<long>(
      std::ceil(min_week_fraction * table.n_weeks - 1e-9));

  std::vector<std::pair<long, std::string>> ranked;  // (total, name)
  for (const auto& [name, row] : table.counts) {
    if (static_cast<int>(row.size()) != table.n_weeks) {
      throw ValidationError("mention table row for '" + name + "' does not cover all weeks");
    }
    long total = 0;
    long weeks_present = 0;
    for (long c : row) {
      total += c;
      if (c > 0) ++weeks_present;
    }
    if (total >= min_mentions && weeks_present >= needed_weeks) {
      ranked.emplace_back(total, name);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> names;
  names.reserve(ranked.size());
  for (auto& [total, name] : ranked) names.push_back(std::move(name));
  return KeyFigureSet::from_ordered_names(std::move(names));
}

}  // namespace netregime
