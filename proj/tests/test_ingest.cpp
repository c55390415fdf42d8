#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <numeric>
#include <sstream>

#include <unistd.h>

#include "decaynet/snapshots.hpp"

using namespace decaynet;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("decaynet_ingest_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

constexpr std::int64_t kJan1 = 1325376000;  // 2012-01-01T00:00:00Z
constexpr std::int64_t kHour = 3600;
constexpr std::int64_t kDay = 24 * kHour;

const char* kPosts = R"(<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="1" PostTypeId="1" OwnerUserId="3" CreationDate="2012-01-01T00:00:00.000" Title="a &amp; b" />
  <row Id="2" PostTypeId="2" ParentId="1" OwnerUserId="7" CreationDate="2012-01-02T00:00:00.000" />
  <row Id="3" PostTypeId="2" ParentId="99" OwnerUserId="8" CreationDate="2012-01-02T00:00:00.000" />
  <row Id="4" PostTypeId="1" OwnerUserId="5" CreationDate="2012-01-01T12:00:00.000" />
  <row Id="5" PostTypeId="2" ParentId="4" CreationDate="2012-01-05T00:00:00.000" />
</posts>
)";

const char* kComments = R"(<?xml version="1.0" encoding="utf-8"?>
<comments>
  <row Id="1" PostId="2" UserId="3" CreationDate="2012-01-03T00:00:00.000" Text="thanks" />
  <row Id="2" PostId="4" UserId="7" CreationDate="2012-01-01T18:00:00.000" />
  <row Id="3" PostId="1" UserId="3" CreationDate="2012-01-03T00:00:00.000" />
</comments>
)";

const char* kUsers = R"(<?xml version="1.0" encoding="utf-8"?>
<users>
  <row Id="3" Reputation="600" />
  <row Id="5" Reputation="499" />
  <row Id="7" Reputation="1200" />
  <row Id="8" Reputation="10" />
</users>
)";

const char* kVotes = R"(<?xml version="1.0" encoding="utf-8"?>
<votes>
  <row Id="1" PostId="1" VoteTypeId="5" UserId="5" CreationDate="2012-01-04T00:00:00.000" />
  <row Id="2" PostId="2" VoteTypeId="2" CreationDate="2012-01-04T00:00:00.000" />
</votes>
)";

}  // namespace

TEST(EdgeList, ParsesRecords) {
  std::istringstream in("source,target,timestamp,kind\n1,2,100\n3,4,7,comment\n");
  const auto r = parse_edge_list(in);
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_EQ(r.events[0], (InteractionEvent{1, 2, 100, EventKind::Generic}));
  EXPECT_EQ(r.events[1], (InteractionEvent{3, 4, 7, EventKind::Comment}));
  EXPECT_TRUE(r.errors.empty());
}

TEST(EdgeList, SelfLoopIsDroppedWithWarning) {
  std::istringstream in("1,1,100\n");
  const auto r = parse_edge_list(in);
  EXPECT_TRUE(r.events.empty());
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_TRUE(r.errors.empty());
}

TEST(EdgeList, BadLineReportsLineNumber) {
  std::istringstream in("1,2,100\n2,3,200\n3,4,yesterday\n");
  const auto r = parse_edge_list(in);
  EXPECT_EQ(r.events.size(), 2u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 3u);
}

TEST(EdgeList, MissingFileIsInputError) {
  EXPECT_THROW(parse_edge_list(fs::path("/nonexistent/edges.csv")), InputError);
}

TEST(Iso8601, Parses) {
  EXPECT_EQ(parse_iso8601("2012-01-01T00:00:00.000"), kJan1);
  EXPECT_EQ(parse_iso8601("2012-01-01T01:02:03Z"), kJan1 + 3723);
  EXPECT_EQ(parse_iso8601("2012-01-02"), kJan1 + kDay);
  EXPECT_FALSE(parse_iso8601("2012-13-01T00:00:00"));
  EXPECT_FALSE(parse_iso8601("garbage"));
}

TEST(StackExchangeDump, FixtureEvents) {
  TempDir dir;
  DumpFiles files{dir.write("Posts.xml", kPosts), dir.write("Comments.xml", kComments),
                  dir.write("Users.xml", kUsers), std::nullopt};
  const auto r = parse_stackexchange_dump(files);
  const std::vector<InteractionEvent> expect{
      {7, 5, kJan1 + 18 * kHour, EventKind::Comment},
      {7, 3, kJan1 + kDay, EventKind::Answer},
      {3, 7, kJan1 + 2 * kDay, EventKind::Comment},
  };
  EXPECT_EQ(r.events, expect);
  EXPECT_EQ(r.counters.missing_parent, 1u);  // answer 3 -> absent question 99
  EXPECT_EQ(r.counters.missing_owner, 1u);   // answer 5 has no owner
  EXPECT_EQ(r.counters.self_interactions, 1u);
  EXPECT_EQ(r.reputation, (std::map<NodeId, std::int64_t>{{3, 600}, {5, 499}, {7, 1200}, {8, 10}}));
}

TEST(StackExchangeDump, VotesWithVoterIdentity) {
  TempDir dir;
  DumpFiles files{dir.write("Posts.xml", kPosts), dir.write("Comments.xml", kComments),
                  dir.write("Users.xml", kUsers), dir.write("Votes.xml", kVotes)};
  const auto r = parse_stackexchange_dump(files);
  ASSERT_EQ(r.events.size(), 4u);
  EXPECT_EQ(r.events.back(), (InteractionEvent{5, 3, kJan1 + 3 * kDay, EventKind::Vote}));
  EXPECT_EQ(r.counters.votes_without_voter, 1u);
}

TEST(StackExchangeDump, AnswerWithAbsentParentIsSkipped) {
  TempDir dir;
  DumpFiles files{dir.write("Posts.xml",
                            "<posts><row Id=\"2\" PostTypeId=\"2\" ParentId=\"1\" OwnerUserId=\"7\" "
                            "CreationDate=\"2012-01-02T00:00:00\"/></posts>"),
                  {}, dir.write("Users.xml", kUsers), std::nullopt};
  const auto r = parse_stackexchange_dump(files);
  EXPECT_TRUE(r.events.empty());
  EXPECT_EQ(r.counters.missing_parent, 1u);
}

TEST(StackExchangeDump, MalformedXmlNamesOffset) {
  TempDir dir;
  DumpFiles files{dir.write("Posts.xml", "<posts>\n<row Id=\"1\" PostTypeId=\"1\" </posts>"), {},
                  dir.write("Users.xml", kUsers), std::nullopt};
  try {
    parse_stackexchange_dump(files);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos) << e.what();
  }
}

TEST(StackExchangeDump, UnknownPostTypesAreCounted) {
  TempDir dir;
  DumpFiles files{dir.write("Posts.xml",
                            "<posts><row Id=\"1\" PostTypeId=\"42\" OwnerUserId=\"3\" "
                            "CreationDate=\"2012-01-02T00:00:00\"/></posts>"),
                  {}, dir.write("Users.xml", kUsers), std::nullopt};
  EXPECT_EQ(parse_stackexchange_dump(files).counters.unknown_post_type, 1u);
}

TEST(StackExchangeDump, MissingUsersIsError) {
  TempDir dir;
  DumpFiles files{dir.write("Posts.xml", kPosts), {}, dir.path() / "Users.xml", std::nullopt};
  EXPECT_THROW(parse_stackexchange_dump(files), InputError);
}

TEST(CoreNodes, ReputationBoundary) {
  const std::map<NodeId, std::int64_t> rep{{1, 600}, {2, 499}};
  EXPECT_EQ(select_core_nodes({}, &rep, {CoreFilterMode::ReputationThreshold, 500}), std::vector<NodeId>{1});
  EXPECT_THROW(select_core_nodes({}, nullptr, {CoreFilterMode::ReputationThreshold, 500}), InputError);
  EXPECT_THROW(select_core_nodes({}, &rep, {CoreFilterMode::ReputationThreshold, 10000}), InputError);
  EXPECT_THROW(select_core_nodes({}, &rep, {CoreFilterMode::ReputationThreshold, 0}), UsageError);
}

TEST(CoreNodes, ActivityThresholdOneKeepsEveryone) {
  const std::vector<InteractionEvent> ev{{1, 2, 0}, {2, 3, 1}, {9, 4, 2}};
  EXPECT_EQ(select_core_nodes(ev, nullptr, {CoreFilterMode::ActivityCountThreshold, 1}),
            (std::vector<NodeId>{1, 2, 3, 4, 9}));
  EXPECT_EQ(select_core_nodes(ev, nullptr, {CoreFilterMode::ActivityCountThreshold, 2}), std::vector<NodeId>{2});
}

TEST(CoreNodes, TenUserFixture) {
  std::map<NodeId, std::int64_t> rep;
  const std::int64_t scores[] = {12, 500, 880, 499, 1, 23000, 501, 0, 750, 300};
  for (NodeId i = 0; i < 10; ++i) rep[100 + i] = scores[i];
  EXPECT_EQ(select_core_nodes({}, &rep, {CoreFilterMode::ReputationThreshold, 500}),
            (std::vector<NodeId>{101, 102, 105, 106, 108}));
}

TEST(BuildSnapshots, SingleEvent) {
  const auto r = build_snapshots({{1, 2, 5}}, {1, 2}, 10, 2);
  const auto& s = r.series;
  EXPECT_EQ(s.start, 5);
  EXPECT_TRUE(s.snapshots[0].has_edge(1, 2));
  EXPECT_EQ(s.snapshots[1].edge_count(), 0u);
  EXPECT_EQ(s.tau(1), 0);
  EXPECT_EQ(s.tau(2), 0);
  EXPECT_TRUE(s.alive.empty());
  EXPECT_FALSE(validate_series(s));
}

TEST(BuildSnapshots, EdgeInBothWindows) {
  const auto r = build_snapshots({{1, 2, 0}, {1, 2, 15}}, {1, 2}, 10, 2);
  EXPECT_EQ(r.series.tau(1), 1);
  EXPECT_EQ(r.series.tau(2), 1);
  EXPECT_EQ(r.series.alive, (std::vector<NodeId>{1, 2}));
}

TEST(BuildSnapshots, SixEventFixture) {
  const std::vector<InteractionEvent> ev{{1, 2, 0}, {2, 3, 4}, {3, 4, 9}, {1, 2, 12}, {3, 5, 15}, {2, 3, 25}};
  const auto r = build_snapshots(ev, {1, 2, 3, 4, 5}, 10, 3);
  const auto& s = r.series;
  EXPECT_EQ(s.snapshots[0].edges(), (std::vector<Edge>{{1, 2}, {2, 3}, {3, 4}}));
  EXPECT_EQ(s.snapshots[1].edges(), (std::vector<Edge>{{1, 2}}));
  EXPECT_EQ(s.snapshots[2].edges(), (std::vector<Edge>{{2, 3}}));
  EXPECT_EQ(s.core_nodes, (std::vector<NodeId>{1, 2, 3, 4}));
  EXPECT_EQ(s.last_activity, (std::map<NodeId, int>{{1, 1}, {2, 2}, {3, 2}, {4, 0}}));
  EXPECT_EQ(s.alive, (std::vector<NodeId>{2, 3}));
  EXPECT_EQ(r.dropped_emerging, 1u);
  EXPECT_FALSE(validate_series(s));
}

TEST(BuildSnapshots, NonCoreEventsIgnoredAndTrailingDropped) {
  const std::vector<InteractionEvent> ev{{1, 2, 0}, {1, 9, 3}, {1, 2, 50}};
  const auto r = build_snapshots(ev, {1, 2}, 10, 2);
  EXPECT_EQ(r.series.core_nodes, (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(r.dropped_trailing, 1u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(BuildSnapshots, DefaultWindowCoversSpan) {
  const std::vector<InteractionEvent> ev{{1, 2, 100}, {1, 2, 125}};
  const auto r = build_snapshots(ev, {1, 2}, std::nullopt, 3);
  EXPECT_EQ(r.series.window, 9);
  EXPECT_EQ(r.dropped_trailing, 0u);
  EXPECT_EQ(r.series.tau(1), 2);
}

TEST(BuildSnapshots, Errors) {
  EXPECT_THROW(build_snapshots({{1, 2, 0}}, {1, 2}, 10, 1), UsageError);
  EXPECT_THROW(build_snapshots({{1, 2, 0}}, {1, 2}, 0, 2), UsageError);
  EXPECT_THROW(build_snapshots({{1, 2, 0}}, {3, 4}, 10, 2), InputError);
}

TEST(BuildSnapshots, PermutationInvariantAndTauWitnessed) {
  std::mt19937_64 rng(17);
  std::vector<InteractionEvent> ev;
  std::uniform_int_distribution<NodeId> node(0, 14);
  std::uniform_int_distribution<std::int64_t> when(0, 999);
  while (ev.size() < 200) {
    const auto a = node(rng), b = node(rng);
    if (a != b) ev.push_back({a, b, when(rng)});
  }
  std::vector<NodeId> core(15);
  std::iota(core.begin(), core.end(), 0);
  const auto base = build_snapshots(ev, core, 100, 10).series;
  ASSERT_FALSE(validate_series(base));
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(ev.begin(), ev.end(), rng);
    const auto other = build_snapshots(ev, core, 100, 10).series;
    EXPECT_EQ(other.last_activity, base.last_activity);
    for (int t = 0; t < base.k(); ++t)
      EXPECT_EQ(other.snapshots[static_cast<std::size_t>(t)].edges(), base.snapshots[static_cast<std::size_t>(t)].edges());
  }
  for (const auto& [v, t] : base.last_activity) {
    EXPECT_GT(base.snapshots[static_cast<std::size_t>(t)].degree(*base.snapshots[static_cast<std::size_t>(t)].index_of(v)), 0u);
    for (int later = t + 1; later < base.k(); ++later) {
      const auto& g = base.snapshots[static_cast<std::size_t>(later)];
      const auto i = g.index_of(v);
      EXPECT_TRUE(!i || g.degree(*i) == 0);
    }
  }
}

TEST(SeriesPersistence, RoundTrip) {
  TempDir dir;
  const std::vector<InteractionEvent> ev{{1, 2, 0}, {2, 3, 4}, {3, 4, 9}, {1, 2, 12}, {2, 3, 25}};
  const auto s = build_snapshots(ev, {1, 2, 3, 4}, 10, 3).series;
  save_series(s, dir.path() / "series");
  const auto back = load_series(dir.path() / "series");
  EXPECT_EQ(back.k(), 3);
  EXPECT_EQ(back.window, 10);
  EXPECT_EQ(back.last_activity, s.last_activity);
  EXPECT_EQ(back.alive, s.alive);
  for (int t = 0; t < 3; ++t)
    EXPECT_EQ(back.snapshots[static_cast<std::size_t>(t)].edges(), s.snapshots[static_cast<std::size_t>(t)].edges());
  EXPECT_FALSE(validate_series(back));
  EXPECT_THROW(load_series(dir.path() / "missing"), MissingStageError);
}

TEST(Synthetic, ChainLevels) {
  SynthSpec spec;
  spec.n = 10;
  spec.k = 5;
  spec.planted = {{0, 1, 2}};
  const auto r = generate_synthetic_decay(spec);
  const auto& s = r.series;
  EXPECT_EQ(s.tau(0), 1);
  EXPECT_EQ(s.tau(1), 2);
  EXPECT_EQ(s.tau(2), 3);
  for (NodeId v = 3; v < 10; ++v) EXPECT_EQ(s.tau(v), 4);
  EXPECT_EQ(s.initial().edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
  EXPECT_FALSE(validate_series(s));
}

TEST(Synthetic, ZeroDensityKeepsOnlyPlantedEdges) {
  SynthSpec spec;
  spec.n = 60;
  spec.k = 8;
  spec.planted = {{0, 2, 2}, {10, 3, 1}, {20, 1, 4}};
  const auto r = generate_synthetic_decay(spec);
  std::vector<Edge> planted;
  for (const auto& t : r.planted)
    for (auto e : t.edges) planted.push_back({std::min(e.u, e.v), std::max(e.u, e.v)});
  std::sort(planted.begin(), planted.end());
  EXPECT_EQ(r.series.initial().edges(), planted);
  EXPECT_EQ(r.series.initial().node_count(), 60u);
  EXPECT_FALSE(validate_series(r.series));
}

TEST(Synthetic, DeterministicForSeed) {
  TempDir dir;
  SynthSpec spec;
  spec.n = 40;
  spec.p_edge = 0.1;
  spec.k = 6;
  spec.seed = 99;
  spec.planted = {{0, 2, 2}};
  save_series(generate_synthetic_decay(spec).series, dir.path() / "a");
  save_series(generate_synthetic_decay(spec).series, dir.path() / "b");
  for (const auto& entry : fs::directory_iterator(dir.path() / "a")) {
    std::ifstream a(entry.path()), b(dir.path() / "b" / entry.path().filename());
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << entry.path().filename();
  }
  spec.seed = 100;
  EXPECT_NE(generate_synthetic_decay(spec).series.initial().edges(),
            load_series(dir.path() / "a").initial().edges());
}

TEST(Synthetic, Errors) {
  SynthSpec spec;
  spec.n = 20;
  spec.k = 6;
  spec.planted = {{0, 2, 2}, {5, 1, 1}};  // first tree occupies 0..6
  EXPECT_THROW(generate_synthetic_decay(spec), UsageError);
  spec.planted = {{0, 1, 4}};  // deepest level would be alive
  EXPECT_THROW(generate_synthetic_decay(spec), UsageError);
  spec.planted = {{15, 2, 2}};  // does not fit in 20 nodes
  EXPECT_THROW(generate_synthetic_decay(spec), UsageError);
}
