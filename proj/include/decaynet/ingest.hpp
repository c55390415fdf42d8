#pragma once

#include <expat.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "decaynet/csv.hpp"
#include "decaynet/error.hpp"
#include "decaynet/graph.hpp"

namespace decaynet {

enum class EventKind { Answer, Comment, Vote, Generic };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Answer: return "Answer";
    case EventKind::Comment: return "Comment";
    case EventKind::Vote: return "Vote";
    case EventKind::Generic: return "Generic";
  }
  return "Generic";
}

inline std::optional<EventKind> parse_event_kind(std::string_view s) {
  std::string lower(trim(s));
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "answer") return EventKind::Answer;
  if (lower == "comment") return EventKind::Comment;
  if (lower == "vote") return EventKind::Vote;
  if (lower == "generic") return EventKind::Generic;
  return std::nullopt;
}

/// One timestamped interaction between two members. Self-interactions never
/// make it into an event; timestamps are seconds since the Unix epoch (UTC).
struct InteractionEvent {
  NodeId source = 0;
  NodeId target = 0;
  std::int64_t timestamp = 0;
  EventKind kind = EventKind::Generic;
  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

// ---------------------------------------------------------------------------
// Generic edge lists: `source,target,timestamp[,kind]`, optional header line.

struct LineError {
  std::size_t line = 0;
  std::string message;
};

struct EdgeListResult {
  std::vector<InteractionEvent> events;
  std::vector<LineError> errors;
  std::vector<std::string> warnings;
};

inline EdgeListResult parse_edge_list(std::istream& in) {
  EdgeListResult out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split_csv_line(line);
    NodeId src = 0, dst = 0;
    std::int64_t ts = 0;
    const bool ids_ok = cells.size() >= 2 && parse_number(cells[0], src) && parse_number(cells[1], dst);
    if (line_no == 1 && !ids_ok) continue;  // header
    if (cells.size() < 3 || cells.size() > 4) {
      out.errors.push_back({line_no, "expected 3 or 4 fields, found " + std::to_string(cells.size())});
      continue;
    }
    if (!ids_ok) {
      out.errors.push_back({line_no, "source and target must be integer ids"});
      continue;
    }
    if (!parse_number(cells[2], ts)) {
      out.errors.push_back({line_no, "timestamp is not an integer: '" + std::string(trim(cells[2])) + "'"});
      continue;
    }
    if (ts < 0) {
      out.errors.push_back({line_no, "timestamp is negative"});
      continue;
    }
    auto kind = EventKind::Generic;
    if (cells.size() == 4 && !trim(cells[3]).empty()) {
      const auto k = parse_event_kind(cells[3]);
      if (!k) {
        out.errors.push_back({line_no, "unknown kind '" + std::string(trim(cells[3])) + "'"});
        continue;
      }
      kind = *k;
    }
    if (src == dst) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": self-interaction dropped");
      continue;
    }
    out.events.push_back({src, dst, ts, kind});
  }
  return out;
}

inline EdgeListResult parse_edge_list(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open edge list " + file.string());
  return parse_edge_list(in);
}

// ---------------------------------------------------------------------------
// Stack Exchange per-site XML dumps.

// "2010-07-19T19:12:12.510" (fraction and trailing 'Z' optional) to epoch
// seconds.
inline std::optional<std::int64_t> parse_iso8601(std::string_view s) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  auto take = [&](std::size_t pos, std::size_t len, auto& out) {
    return pos + len <= s.size() && parse_number(s.substr(pos, len), out);
  };
  if (!take(0, 4, y) || s.size() < 10 || s[4] != '-' || !take(5, 2, mo) || s[7] != '-' || !take(8, 2, d))
    return std::nullopt;
  if (s.size() > 10) {
    if ((s[10] != 'T' && s[10] != ' ') || !take(11, 2, h) || s[13] != ':' || !take(14, 2, mi) ||
        s.size() < 19 || s[16] != ':' || !take(17, 2, sec))
      return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch();
  return duration_cast<seconds>(days).count() + h * 3600LL + mi * 60LL + sec;
}

namespace detail {

using RowHandler = std::function<void(const std::unordered_map<std::string, std::string>&)>;

// Streams `<row .../>` elements of one dump table through expat.
inline void stream_rows(const std::filesystem::path& file, const std::string& table, const RowHandler& on_row) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open " + table + " file " + file.string());

  struct Ctx {
    const RowHandler* handler;
    std::unordered_map<std::string, std::string> attrs;
  } ctx{&on_row, {}};

  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(XML_ParserCreate("UTF-8"),
                                                                                         &XML_ParserFree);
  XML_SetUserData(parser.get(), &ctx);
  XML_SetStartElementHandler(parser.get(), [](void* data, const XML_Char* name, const XML_Char** atts) {
    auto* c = static_cast<Ctx*>(data);
    if (std::string_view(name) != "row") return;
    c->attrs.clear();
    for (std::size_t i = 0; atts[i]; i += 2) c->attrs.emplace(atts[i], atts[i + 1]);
    (*c->handler)(c->attrs);
  });

  std::vector<char> buf(1 << 16);
  while (true) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    const bool last = got < static_cast<std::streamsize>(buf.size());
    if (XML_Parse(parser.get(), buf.data(), static_cast<int>(got), last) == XML_STATUS_ERROR) {
      throw InputError(table + " file " + file.string() + ": malformed XML at byte offset " +
                       std::to_string(XML_GetCurrentByteIndex(parser.get())) + " (" +
                       XML_ErrorString(XML_GetErrorCode(parser.get())) + ")");
    }
    if (last) break;
  }
}

inline std::optional<std::int64_t> int_attr(const std::unordered_map<std::string, std::string>& a,
                                            const char* key) {
  const auto it = a.find(key);
  std::int64_t v = 0;
  if (it == a.end() || !parse_number(it->second, v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> date_attr(const std::unordered_map<std::string, std::string>& a,
                                             const char* key) {
  const auto it = a.find(key);
  if (it == a.end()) return std::nullopt;
  return parse_iso8601(it->second);
}

}  // namespace detail

struct DumpFiles {
  std::filesystem::path posts;
  std::filesystem::path comments;
  std::filesystem::path users;
  std::optional<std::filesystem::path> votes;
};

struct DumpCounters {
  std::size_t posts = 0;
  std::size_t comments = 0;
  std::size_t votes = 0;
  std::size_t users = 0;
  std::size_t missing_owner = 0;     // rows whose acting or receiving user id is absent
  std::size_t missing_parent = 0;    // answers/comments/votes pointing at an absent post
  std::size_t unknown_post_type = 0; // PostTypeId outside the documented 1..8
  std::size_t bad_date = 0;
  std::size_t self_interactions = 0;
  std::size_t votes_without_voter = 0;
};

struct DumpResult {
  std::vector<InteractionEvent> events;  // sorted by timestamp (stable)
  std::map<NodeId, std::int64_t> reputation;
  DumpCounters counters;
};

/// Turns a site dump into interaction events: answer author -> question
/// owner, commenter -> post owner, and voter -> post owner when the vote row
/// carries a UserId.
inline DumpResult parse_stackexchange_dump(const DumpFiles& files) {
  if (files.users.empty() || !std::filesystem::exists(files.users))
    throw InputError("Users table is required for the reputation filter: " + files.users.string());

  DumpResult out;
  auto& cnt = out.counters;
  std::unordered_map<std::int64_t, std::optional<NodeId>> owner;  // post id -> owner

  struct PendingAnswer {
    NodeId author;
    std::int64_t parent;
    std::int64_t ts;
  };
  std::vector<PendingAnswer> answers;

  detail::stream_rows(files.posts, "Posts", [&](const auto& a) {
    ++cnt.posts;
    const auto id = detail::int_attr(a, "Id");
    const auto type = detail::int_attr(a, "PostTypeId");
    if (!id || !type) {
      ++cnt.missing_owner;
      return;
    }
    const auto user = detail::int_attr(a, "OwnerUserId");
    owner[*id] = user;
    if (*type < 1 || *type > 8) {
      ++cnt.unknown_post_type;
      return;
    }
    if (*type != 2) return;
    const auto parent = detail::int_attr(a, "ParentId");
    const auto ts = detail::date_attr(a, "CreationDate");
    if (!user) {
      ++cnt.missing_owner;
      return;
    }
    if (!parent) {
      ++cnt.missing_parent;
      return;
    }
    if (!ts) {
      ++cnt.bad_date;
      return;
    }
    answers.push_back({*user, *parent, *ts});
  });

  // Rows whose target post or owner cannot be resolved are counted, not emitted.
  auto emit = [&](NodeId actor, std::int64_t post, std::int64_t ts, EventKind kind) {
    const auto it = owner.find(post);
    if (it == owner.end()) {
      ++cnt.missing_parent;
      return;
    }
    if (!it->second) {
      ++cnt.missing_owner;
      return;
    }
    if (*it->second == actor) {
      ++cnt.self_interactions;
      return;
    }
    out.events.push_back({actor, *it->second, ts, kind});
  };

  for (const auto& ans : answers) emit(ans.author, ans.parent, ans.ts, EventKind::Answer);

  if (!files.comments.empty()) {
    detail::stream_rows(files.comments, "Comments", [&](const auto& a) {
      ++cnt.comments;
      const auto user = detail::int_attr(a, "UserId");
      const auto post = detail::int_attr(a, "PostId");
      const auto ts = detail::date_attr(a, "CreationDate");
      if (!user) {
        ++cnt.missing_owner;
        return;
      }
      if (!post) {
        ++cnt.missing_parent;
        return;
      }
      if (!ts) {
        ++cnt.bad_date;
        return;
      }
      emit(*user, *post, *ts, EventKind::Comment);
    });
  }

  if (files.votes) {
    detail::stream_rows(*files.votes, "Votes", [&](const auto& a) {
      ++cnt.votes;
      const auto user = detail::int_attr(a, "UserId");
      const auto post = detail::int_attr(a, "PostId");
      const auto ts = detail::date_attr(a, "CreationDate");
      if (!user) {
        ++cnt.votes_without_voter;
        return;
      }
      if (!post) {
        ++cnt.missing_parent;
        return;
      }
      if (!ts) {
        ++cnt.bad_date;
        return;
      }
      emit(*user, *post, *ts, EventKind::Vote);
    });
  }

  detail::stream_rows(files.users, "Users", [&](const auto& a) {
    ++cnt.users;
    const auto id = detail::int_attr(a, "Id");
    const auto rep = detail::int_attr(a, "Reputation");
    if (id && rep) out.reputation[*id] = *rep;
  });

  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
  return out;
}

// ---------------------------------------------------------------------------
// Core node selection.

enum class CoreFilterMode { ReputationThreshold, ActivityCountThreshold };

struct CoreFilterSpec {
  CoreFilterMode mode = CoreFilterMode::ReputationThreshold;
  std::int64_t threshold = 500;
};

inline std::vector<NodeId> select_core_nodes(const std::vector<InteractionEvent>& events,
                                             const std::map<NodeId, std::int64_t>* reputations,
                                             const CoreFilterSpec& spec) {
  if (spec.threshold <= 0) throw UsageError("core filter threshold must be positive");
  std::vector<NodeId> core;
  if (spec.mode == CoreFilterMode::ReputationThreshold) {
    if (!reputations) throw InputError("reputation filter requested but no reputations are available");
    for (const auto& [id, rep] : *reputations)
      if (rep >= spec.threshold) core.push_back(id);
  } else {
    std::map<NodeId, std::int64_t> count;
    for (const auto& e : events) {
      ++count[e.source];
      ++count[e.target];
    }
    for (const auto& [id, c] : count)
      if (c >= spec.threshold) core.push_back(id);
  }
  if (core.empty())
    throw InputError("core filter (threshold " + std::to_string(spec.threshold) +
                     ") selected no nodes; try a lower threshold");
  return core;
}

}  // namespace decaynet
