#include "hmcd/data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "hmcd/errors.hpp"
#include "hmcd/random.hpp"
#include "hmcd/text_format.hpp"

namespace hmcd {

ItemIndex Vocabulary::intern(std::string_view id) {
  if (auto found = find(id)) return *found;
  const auto index = static_cast<ItemIndex>(ids_.size());
  ids_.emplace_back(id);
  index_.emplace(ids_.back(), index);
  return index;
}

std::optional<ItemIndex> Vocabulary::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (const auto& id : vocab.ids()) out << id << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto id = trim(line);
    if (id.empty()) continue;
    if (v.find(id)) throw ParseError("duplicate vocabulary id '" + std::string(id) + "'", lineno);
    v.intern(id);
  }
  return v;
}

namespace {

struct Row {
  long long position;
  ItemIndex item;
  std::size_t line;
};

struct UserRows {
  std::string user_id;
  std::vector<Row> rows;
  std::optional<GroundTruth> truth;
  std::size_t truth_line = 0;
};

}  // namespace

Dataset read_interactions(std::istream& in, const Vocabulary* fixed_vocab) {
  Dataset data;
  if (fixed_vocab) data.vocab = *fixed_vocab;

  std::vector<UserRows> users;
  std::unordered_map<std::string, std::size_t> user_index;
  bool labeled = false;
  bool have_header = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto cols = split(body, ',');
    if (!have_header) {
      std::vector<std::string_view> names;
      for (auto c : cols) names.push_back(trim(c));
      const std::vector<std::string_view> plain{"user_id", "item_id", "position"};
      const std::vector<std::string_view> full{"user_id", "item_id", "position",
                                               "change_point", "src1", "src2"};
      if (names == plain) {
        labeled = false;
      } else if (names == full) {
        labeled = true;
      } else {
        throw ParseError("unexpected header '" + std::string(body) + "'", lineno);
      }
      have_header = true;
      continue;
    }
    const std::size_t expected = labeled ? 6 : 3;
    if (cols.size() != expected) {
      throw ParseError("expected " + std::to_string(expected) + " columns, found " +
                           std::to_string(cols.size()),
                       lineno);
    }
    const auto user = trim(cols[0]);
    const auto item = trim(cols[1]);
    if (user.empty() || item.empty()) throw ParseError("empty user or item id", lineno);
    const long long position = parse_integer(cols[2], lineno);

    ItemIndex index;
    if (fixed_vocab) {
      const auto found = data.vocab.find(item);
      if (!found) {
        throw VocabularyError("line " + std::to_string(lineno) + ": unknown item '" + std::string(item) + "'");
      }
      index = *found;
    } else {
      index = data.vocab.intern(item);
    }

    auto [it, inserted] = user_index.emplace(std::string(user), users.size());
    if (inserted) users.push_back(UserRows{std::string(user), {}, std::nullopt, 0});
    auto& u = users[it->second];
    u.rows.push_back(Row{position, index, lineno});

    if (labeled) {
      const long long cp = parse_integer(cols[3], lineno);
      if (cp < 0) throw ParseError("negative change_point", lineno);
      GroundTruth g{static_cast<std::size_t>(cp), std::string(trim(cols[4])), std::string(trim(cols[5]))};
      if (!u.truth) {
        u.truth = g;
        u.truth_line = lineno;
      } else if (u.truth->change_point != g.change_point || u.truth->src1 != g.src1 ||
                 u.truth->src2 != g.src2) {
        throw ParseError("inconsistent labels for user '" + u.user_id + "'", lineno);
      }
    }
  }
  if (!have_header) throw ParseError("missing header", 0);

  for (auto& u : users) {
    std::stable_sort(u.rows.begin(), u.rows.end(),
                     [](const Row& a, const Row& b) { return a.position < b.position; });
    for (std::size_t k = 1; k < u.rows.size(); ++k) {
      if (u.rows[k].position == u.rows[k - 1].position) {
        throw ParseError("duplicate position " + std::to_string(u.rows[k].position) + " for user '" +
                             u.user_id + "'",
                         std::max(u.rows[k].line, u.rows[k - 1].line));
      }
    }
    InteractionSequence seq{u.user_id, {}};
    seq.items.reserve(u.rows.size());
    for (const auto& r : u.rows) seq.items.push_back(r.item);
    if (labeled) {
      if (u.truth->change_point < 1 || u.truth->change_point >= seq.size()) {
        throw ParseError("change_point out of range for user '" + u.user_id + "'", u.truth_line);
      }
      data.truth.push_back(*u.truth);
    }
    data.sequences.push_back(std::move(seq));
  }
  return data;
}

Dataset load_interactions(const std::filesystem::path& path, const Vocabulary* fixed_vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_interactions(in, fixed_vocab);
}

void write_interactions(std::ostream& out, const Vocabulary& vocab,
                        std::span<const InteractionSequence> seqs) {
  out << "user_id,item_id,position\n";
  for (const auto& s : seqs) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      out << s.user_id << ',' << vocab.id(s.items[t]) << ',' << t << '\n';
    }
  }
}

void write_labeled(std::ostream& out, const Vocabulary& vocab, std::span<const LabeledSequence> seqs) {
  out << "user_id,item_id,position,change_point,src1,src2\n";
  for (const auto& l : seqs) {
    const auto& s = l.sequence;
    for (std::size_t t = 0; t < s.size(); ++t) {
      out << s.user_id << ',' << vocab.id(s.items[t]) << ',' << t << ',' << l.change_point << ','
          << l.src1 << ',' << l.src2 << '\n';
    }
  }
}

std::vector<LabeledSequence> synth_concat(std::span<const InteractionSequence> pool, std::size_t count,
                                          std::uint64_t seed, std::size_t min_window,
                                          std::size_t max_window,
                                          std::span<const std::size_t> groups) {
  if (pool.size() < 2) throw InvalidParameterError("synth_concat: pool needs at least 2 sequences");
  if (min_window < 1 || min_window > max_window) {
    throw InvalidParameterError("synth_concat: need 1 <= min_window <= max_window");
  }
  std::size_t shortest = pool.front().size();
  for (const auto& s : pool) shortest = std::min(shortest, s.size());
  if (max_window > shortest) {
    throw InvalidParameterError("synth_concat: max_window exceeds the shortest pool sequence");
  }
  if (!groups.empty()) {
    if (groups.size() != pool.size()) throw InvalidParameterError("synth_concat: one group per pool sequence");
    if (std::all_of(groups.begin(), groups.end(), [&](std::size_t g) { return g == groups[0]; })) {
      throw InvalidParameterError("synth_concat: groups must contain at least two distinct labels");
    }
  }

  std::vector<LabeledSequence> out;
  out.reserve(count);
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < count; ++k) {
    std::mt19937_64 gen(derive_seed(seed, k));
    const std::size_t p1 = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(gen);
    candidates.clear();
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (c == p1) continue;
      if (!groups.empty() && groups[c] == groups[p1]) continue;
      candidates.push_back(c);
    }
    const std::size_t p2 = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(gen)];

    std::uniform_int_distribution<std::size_t> window(min_window, max_window);
    const std::size_t w1 = window(gen);
    const std::size_t w2 = window(gen);
    const auto& a = pool[p1].items;
    const auto& b = pool[p2].items;
    const std::size_t s1 = std::uniform_int_distribution<std::size_t>(0, a.size() - w1)(gen);
    const std::size_t s2 = std::uniform_int_distribution<std::size_t>(0, b.size() - w2)(gen);

    LabeledSequence l;
    std::string id = std::to_string(k);
    l.sequence.user_id = "s" + std::string(width - id.size(), '0') + id;
    l.sequence.items.assign(a.begin() + static_cast<std::ptrdiff_t>(s1),
                            a.begin() + static_cast<std::ptrdiff_t>(s1 + w1));
    l.sequence.items.insert(l.sequence.items.end(), b.begin() + static_cast<std::ptrdiff_t>(s2),
                            b.begin() + static_cast<std::ptrdiff_t>(s2 + w2));
    l.change_point = w1;
    l.src1 = pool[p1].user_id;
    l.src2 = pool[p2].user_id;
    out.push_back(std::move(l));
  }
  return out;
}

HoldoutSplit holdout_split(std::span<const InteractionSequence> seqs, std::size_t n) {
  if (n < 1) throw InvalidParameterError("holdout_split: n must be >= 1");
  HoldoutSplit split;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto& seq = seqs[s];
    if (seq.size() <= n) {
      ++split.skipped;
      continue;
    }
    const auto cut = static_cast<std::ptrdiff_t>(seq.size() - n);
    HoldoutEntry e;
    e.source = s;
    e.prefix.user_id = seq.user_id;
    e.prefix.items.assign(seq.items.begin(), seq.items.begin() + cut);
    e.heldout.assign(seq.items.begin() + cut, seq.items.end());
    split.entries.push_back(std::move(e));
  }
  return split;
}

PlantedPool planted_hmm_pool(std::size_t h, std::size_t m, std::span<const std::size_t> lengths,
                             std::uint64_t seed) {
  if (h < 2) throw InvalidParameterError("planted_hmm_pool: h must be >= 2");
  if (m == 0 || m % h != 0) throw InvalidParameterError("planted_hmm_pool: m must be a positive multiple of h");
  const std::size_t block = m / h;

  PlantedPool pool;
  auto& g = pool.generator;
  g.num_states = h;
  g.num_items = m;
  g.seed = seed;
  g.pi.assign(h, 1.0 / static_cast<double>(h));
  g.trans = Matrix(h, h);
  for (std::size_t s = 0; s < h; ++s) g.trans(s, s) = 1.0;
  g.emis = Matrix(h, m);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 0; s < h; ++s) {
    double total = 0.0;
    for (std::size_t k = 0; k < block; ++k) {
      const double w = 1.0 - unit(gen);
      g.emis(s, s * block + k) = w;
      total += w;
    }
    for (std::size_t k = 0; k < block; ++k) g.emis(s, s * block + k) /= total;
  }

  std::vector<std::discrete_distribution<std::size_t>> emit;
  for (std::size_t s = 0; s < h; ++s) {
    const auto row = g.emis.row(s).subspan(s * block, block);
    emit.emplace_back(row.begin(), row.end());
  }
  const std::size_t width = std::to_string(lengths.empty() ? 0 : lengths.size() - 1).size();
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    std::mt19937_64 local(derive_seed(seed, k));
    const std::size_t state = std::uniform_int_distribution<std::size_t>(0, h - 1)(local);
    InteractionSequence seq;
    const std::string id = std::to_string(k);
    seq.user_id = "p" + std::string(width - id.size(), '0') + id;
    seq.items.reserve(lengths[k]);
    for (std::size_t t = 0; t < lengths[k]; ++t) {
      seq.items.push_back(static_cast<ItemIndex>(state * block + emit[state](local)));
    }
    pool.sequences.push_back(std::move(seq));
    pool.states.push_back(state);
  }
  return pool;
}

Vocabulary index_vocabulary(std::size_t m) {
  Vocabulary v;
  for (std::size_t i = 0; i < m; ++i) v.intern(std::to_string(i));
  return v;
}

}  // namespace hmcd
