#include "doctest.h"

#include <fstream>

#include "netregime/corpus.hpp"
#include "netregime/errors.hpp"
#include "test_util.hpp"

using namespace netregime;

namespace {

AliasTable toy_aliases() { return AliasTable::from_tsv(testutil::fixture("aliases_toy.tsv")); }

SurnameLexicon toy_surnames() {
  return SurnameLexicon::from_file(testutil::fixture("surnames_toy.txt"));
}

ArticleRecord article(const std::string& text, const std::string& date = "2018-01-01") {
  return ArticleRecord{"x", "Test", parse_date(date), text};
}

}  // namespace

TEST_CASE("normalize_text lower-cases, trims and collapses whitespace") {
  CHECK(normalize_text("  A  B\tC ") == "a b c");
  CHECK(normalize_text("Kim   Jong\n Un") == "kim jong un");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("  \t\n ") == "");
  CHECK(normalize_text("already clean") == "already clean");
}

TEST_CASE("alias table registers canonicals as their own variants") {
  AliasTable t;
  t.add("Jane Doe", "Jane");
  CHECK(t.canonical_count() == 1);
  CHECK(t.has_canonical("Jane Doe"));
  const auto& variants = t.entries().at("Jane Doe");
  CHECK(variants.size() == 2);  // self plus "Jane"
}

TEST_CASE("alias table rejects a variant claimed by two canonicals") {
  AliasTable t;
  t.add("Jane Doe", "Jane");
  CHECK_NOTHROW(t.add("Jane Doe", "Jane"));  // same pair is idempotent
  CHECK_THROWS_AS(t.add("Jane Roe", "Jane"), ValidationError);
  CHECK_THROWS_AS(t.add("Jane Roe", "jANE"), ValidationError);  // normalized clash
  CHECK_THROWS_AS(t.add("", "X"), ValidationError);
  CHECK_THROWS_AS(t.add("X", "  "), ValidationError);
}

TEST_CASE("from_tsv reads the fixture and skips comments") {
  const AliasTable t = toy_aliases();
  CHECK(t.canonical_count() == 4);
  CHECK(t.has_canonical("Alice Cooper"));
  CHECK(t.has_canonical("Dan Brown"));
}

TEST_CASE("from_tsv rejects lines without a tab") {
  const auto dir = testutil::scratch_dir("bad_tsv");
  const auto path = dir / "broken.tsv";
  std::ofstream(path) << "Alice Cooper, Alice\n";
  CHECK_THROWS_AS(AliasTable::from_tsv(path), ValidationError);
  CHECK_THROWS_AS(AliasTable::from_tsv(dir / "absent.tsv"), IoError);
}

TEST_CASE("match order puts longer variants first") {
  const AliasTable t = toy_aliases();
  const auto& order = t.match_order();
  REQUIRE(!order.empty());
  for (std::size_t i = 1; i < order.size(); ++i) {
    CHECK(order[i - 1].first.size() >= order[i].first.size());
  }
}

TEST_CASE("mention counting consumes matched spans longest-first") {
  const auto lex = toy_surnames();
  const auto aliases = toy_aliases();

  SUBCASE("full name is one mention, not name plus bare first name") {
    const auto counts = extract_mention_counts(article("Bob Stone spoke."), lex, aliases);
    REQUIRE(counts.count("Bob Stone"));
    CHECK(counts.at("Bob Stone") == 1);
    CHECK(counts.size() == 1);
  }
  SUBCASE("all variants of one canonical accumulate") {
    const auto counts = extract_mention_counts(
        article("Ms. Cooper met Alice Cooper, and later Alice left."), lex, aliases);
    CHECK(counts.at("Alice Cooper") == 3);
  }
  SUBCASE("matches respect token boundaries") {
    const auto counts =
        extract_mention_counts(article("Bobby praised the Carolers."), lex, aliases);
    CHECK(counts.empty());
  }
  SUBCASE("punctuation ends a token") {
    const auto counts =
        extract_mention_counts(article("Carol's plan, or Bob?"), lex, aliases);
    CHECK(counts.at("Carol Danvers") == 1);
    CHECK(counts.at("Bob Stone") == 1);
  }
  SUBCASE("case and whitespace are immaterial") {
    const auto counts =
        extract_mention_counts(article("ALICE   cooper and bob stone"), lex, aliases);
    CHECK(counts.at("Alice Cooper") == 1);
    CHECK(counts.at("Bob Stone") == 1);
  }
  SUBCASE("empty text yields nothing") {
    CHECK(extract_mention_counts(article(""), lex, aliases).empty());
  }
}

TEST_CASE("extract_mentions deduplicates to canonical names") {
  const auto mentions = extract_mentions(
      article("Bob met Bob Stone while Alice watched."), toy_surnames(), toy_aliases());
  CHECK(mentions == std::set<std::string>{"Alice Cooper", "Bob Stone"});
}

TEST_CASE("extraction requires a lexicon and a non-empty alias table") {
  CHECK_THROWS_AS(extract_mentions(article("x"), SurnameLexicon{}, toy_aliases()),
                  ValidationError);
  CHECK_THROWS_AS(extract_mentions(article("x"), toy_surnames(), AliasTable{}),
                  ValidationError);
}

TEST_CASE("discover_candidate_names flags capitalized runs holding a surname") {
  const auto names = discover_candidate_names(
      article("He said Alice Cooper met Dan Brown yesterday, then drove home."),
      toy_surnames());
  CHECK(names.count("Alice Cooper") == 1);
  CHECK(names.count("Dan Brown") == 1);
  // single-token runs and surname-free runs do not qualify
  const auto none = discover_candidate_names(
      article("Stone walls and New York winters."), toy_surnames());
  CHECK(none.empty());
}

TEST_CASE("load_articles keeps good records and reports each bad line") {
  const DateRange window{parse_date("2018-01-01"), parse_date("2018-01-14")};
  const LoadReport report = load_articles(testutil::fixture("bad_lines.jsonl"), window);

  REQUIRE(report.articles.size() == 2);
  CHECK(report.articles[0].id == "g1");
  CHECK(report.articles[1].id == "g4");
  CHECK(report.articles[0].date == parse_date("2018-01-03"));

  REQUIRE(report.errors.size() == 6);
  CHECK(report.errors[0].line == 2);  // not JSON
  CHECK(report.errors[1].line == 3);  // impossible date
  CHECK(report.errors[2].line == 4);  // missing date field
  CHECK(report.errors[3].line == 7);  // unparseable date
  CHECK(report.errors[4].line == 8);  // blank text
  CHECK(report.errors[5].line == 9);  // duplicate id
  CHECK(report.errors[0].message.find("invalid JSON") != std::string::npos);
  CHECK(report.errors[2].message.find("date") != std::string::npos);
}

TEST_CASE("load_articles silently skips records outside the window") {
  const DateRange narrow{parse_date("2018-01-01"), parse_date("2018-01-07")};
  const LoadReport report = load_articles(testutil::fixture("bad_lines.jsonl"), narrow);
  CHECK(report.articles.size() == 1);  // g4 now falls outside
  CHECK(report.errors.size() == 6);
}

TEST_CASE("load_articles throws IoError for a missing file") {
  const DateRange window{parse_date("2018-01-01"), parse_date("2018-01-07")};
  CHECK_THROWS_AS(load_articles("/nonexistent/path.jsonl", window), IoError);
}

TEST_CASE("filter keeps keyword articles case-insensitively") {
  std::vector<ArticleRecord> articles{
      article("Talks about KOREA resumed.", "2018-01-02"),
      article("An unrelated market story.", "2018-01-03"),
      article("The korean peninsula watched.", "2018-01-04"),
  };
  articles[1].id = "b";
  articles[2].id = "c";
  const auto kept = filter_and_dedupe(articles, "Korea");
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].text.find("KOREA") != std::string::npos);
  CHECK_THROWS_AS(filter_and_dedupe(articles, ""), ValidationError);
}

TEST_CASE("duplicate texts keep the earliest copy regardless of file order") {
  ArticleRecord early = article("Korea update:  markets  closed.", "2018-01-02");
  ArticleRecord late = article("KOREA UPDATE: markets closed.", "2018-01-05");
  early.id = "early";
  late.id = "late";

  SUBCASE("early first") {
    const auto kept = filter_and_dedupe({early, late}, "Korea");
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].id == "early");
  }
  SUBCASE("late first") {
    const auto kept = filter_and_dedupe({late, early}, "Korea");
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].id == "early");
  }
}

TEST_CASE("select_key_figures applies both thresholds") {
  MentionTable table;
  table.n_weeks = 4;
  table.add("Alpha", 1, 1);
  table.add("Alpha", 2, 1);
  table.add("Alpha", 3, 1);
  table.add("Alpha", 4, 1);
  table.add("Beta", 1, 3);
  table.add("Beta", 3, 1);
  table.add("Gamma", 1, 5);

  SUBCASE("mentions and week count both bind") {
    const auto set = select_key_figures(table, 4, 0.5);  // needs 2 of 4 weeks
    REQUIRE(set.size() == 2);
    // totals tie at 4, so alphabetical order breaks it
    CHECK(set.names == std::vector<std::string>{"Alpha", "Beta"});
    CHECK(set.index.at("Beta") == 1);
  }
  SUBCASE("gamma fails the week fraction despite the most mentions") {
    const auto set = select_key_figures(table, 1, 0.5);
    CHECK(set.names == std::vector<std::string>{"Alpha", "Beta"});
  }
  SUBCASE("ordering is by total mentions descending") {
    const auto set = select_key_figures(table, 1, 0.25);  // 1 week suffices
    CHECK(set.names == std::vector<std::string>{"Gamma", "Alpha", "Beta"});
  }
  SUBCASE("fraction one demands every week") {
    const auto set = select_key_figures(table, 1, 1.0);
    CHECK(set.names == std::vector<std::string>{"Alpha"});
  }
  SUBCASE("the week requirement rounds up without drifting over integers") {
    // 0.75 of 4 weeks must demand exactly 3, not 4
    const auto set = select_key_figures(table, 1, 0.75);
    CHECK(set.names == std::vector<std::string>{"Alpha"});
    MentionTable three;
    three.n_weeks = 4;
    three.add("Delta", 1, 1);
    three.add("Delta", 2, 1);
    three.add("Delta", 3, 1);
    CHECK(select_key_figures(three, 1, 0.75).names ==
          std::vector<std::string>{"Delta"});
  }
  SUBCASE("an empty selection is legal") {
    CHECK(select_key_figures(table, 100, 0.5).size() == 0);
  }
}

TEST_CASE("mention table rejects weeks outside its span") {
  MentionTable table;
  table.n_weeks = 4;
  CHECK_THROWS_AS(table.add("X", 0), ValidationError);
  CHECK_THROWS_AS(table.add("X", 5), ValidationError);
}

TEST_CASE("bundled alias table is well-formed and resolves the leader variants") {
  const AliasTable aliases = AliasTable::from_tsv(testutil::data_file("aliases_default.tsv"));
  const SurnameLexicon lex =
      SurnameLexicon::from_file(testutil::data_file("surnames.txt"));
  CHECK(aliases.canonical_count() >= 34);
  CHECK(!lex.surnames.empty());
  const auto mentions = extract_mentions(
      article("Kim Jong Un, Kim Jung Un, Kim Jung Eun, Mr. Kim and Leader Kim are one."),
      lex, aliases);
  CHECK(mentions == std::set<std::string>{"Kim Jong-un"});
}
