#include "nav/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>

#include "nav/error.hpp"

namespace nav {

namespace {

constexpr std::array kSyllables = {"ka", "lo", "mi", "tre", "vo", "zu", "pen", "dar", "qui", "sol", "ne", "bra",
                                   "fi", "gor", "ul", "xan", "ry", "tes", "mon", "ci", "da", "lek", "por", "vin"};

constexpr std::array kFirstNames = {"Alice", "Bo",    "Chen",  "Dana",   "Elif",   "Farid", "Grace", "Hiro",
                                    "Ines",  "Jonas", "Kavya", "Liam",   "Mei",    "Nadia", "Omar",  "Priya",
                                    "Quinn", "Rosa",  "Sven",  "Tariq",  "Uma",    "Viktor", "Wen",  "Yusuf",
                                    "Zara",  "Aron",  "Beatriz", "Caio", "Dmitri", "Emma"};

constexpr std::array kSurnames = {
    "Abbott",  "Becker",   "Castillo", "Dubois",  "Eriksen", "Fischer", "Garcia",   "Haddad",  "Ivanova", "Jansen",
    "Kowalski", "Larsen",  "Moreau",   "Nakamura", "Okafor", "Petrov",  "Quintero", "Rossi",   "Schmidt", "Tanaka",
    "Ueda",    "Varga",    "Wagner",   "Xu",      "Yilmaz",  "Zhang",   "Almeida",  "Brennan", "Costa",   "Dvorak",
    "Estrada", "Fontaine", "Gupta",    "Horvat",  "Iqbal",   "Jovanovic", "Kim",    "Lindqvist", "Mendes", "Novak",
    "Ortega",  "Park",     "Reyes",    "Sato",    "Thompson", "Urban",  "Vasquez",  "Weber",   "Yamada",  "Zielinski"};

constexpr std::array kVenues = {"NeurIPS", "ICML", "ICLR", "ACL", "EMNLP", "NAACL", "CVPR", "SIGIR", "KDD", "AAAI"};

constexpr std::array kFillers = {
    "The remainder of this section describes the experimental protocol in detail.",
    "All hyperparameters were selected on a held-out validation split.",
    "We report the mean over five random seeds.",
    "Training took roughly two days on a single machine.",
    "Error analysis reveals that most failures involve rare inputs.",
    "Code and trained models are publicly available.",
    "Related work is discussed at the end of the paper.",
    "See Fig. 3 for a qualitative comparison.",
    "Prior work by Smith et al. explored a similar direction.",
    "The results in Table 2 are statistically significant.",
};

class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t next() { return gen_(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  template <typename C>
  const auto& pick(const C& c) {
    return c[below(std::size(c))];
  }

private:
  std::mt19937_64 gen_;
};

std::string capitalize_words(std::string s) {
  bool start = true;
  for (auto& ch : s) {
    if (start && ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
    start = ch == ' ' || ch == '-';
  }
  return s;
}

std::string capitalize_first(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

struct Topic {
  const Concept* task;
  const Concept* method;
  const Concept* method2;
  const Concept* dataset;
  const Concept* metric;
  const Concept* org;
};

struct Pools {
  std::map<ConceptType, std::vector<const Concept*>> by_type;
  const std::vector<const Concept*>& of(ConceptType t) const {
    auto it = by_type.find(t);
    if (it == by_type.end() || it->second.empty())
      throw Error(ErrorCode::PreconditionViolation, "synthetic corpus needs concepts of type " + std::string(to_string(t)));
    return it->second;
  }
};

// A name or, sometimes, one of its aliases.
std::string surface(const Concept& c, Rng& rng) {
  if (!c.aliases.empty() && rng.chance(0.3)) return rng.pick(c.aliases);
  return c.canonical_name;
}

std::string pseudo_word(Rng& rng, std::set<std::string>& used) {
  for (;;) {
    std::string w;
    const std::size_t n = 2 + rng.below(2);
    for (std::size_t i = 0; i < n; ++i) w += rng.pick(kSyllables);
    if (used.insert(w).second) return w;
  }
}

std::string reference_authors(const std::vector<std::string>& authors) {
  auto initial = [](const std::string& name) {
    auto sp = name.find(' ');
    return name.substr(0, 1) + ". " + (sp == std::string::npos ? name : name.substr(sp + 1));
  };
  if (authors.size() > 3) return initial(authors[0]) + " et al";
  std::string out;
  for (std::size_t i = 0; i < authors.size(); ++i) {
    if (i > 0) out += authors.size() == 2 ? " and " : (i + 1 == authors.size() ? ", and " : ", ");
    out += initial(authors[i]);
  }
  return out;
}

std::string with_typo(const std::string& title, Rng& rng) {
  std::vector<std::size_t> letters;
  for (std::size_t i = 1; i < title.size(); ++i) {
    if (title[i] >= 'a' && title[i] <= 'z') letters.push_back(i);
  }
  if (letters.empty()) return title;
  std::string out = title;
  const auto pos = letters[rng.below(letters.size())];
  char repl = static_cast<char>('a' + rng.below(26));
  if (repl == out[pos]) repl = repl == 'z' ? 'a' : static_cast<char>(repl + 1);
  out[pos] = repl;
  return out;
}

std::string make_title(const Topic& t, const std::string& w1, const std::string& w2, Rng& rng) {
  const auto W1 = capitalize_first(w1);
  const auto W2 = capitalize_first(w2);
  switch (rng.below(5)) {
    case 0: return W1 + ": " + capitalize_words(t.method->canonical_name) + " for " + capitalize_words(t.task->canonical_name) + " with " + W2 + " Priors";
    case 1: return W1 + " " + W2 + ": Revisiting " + capitalize_words(t.task->canonical_name) + " on " + capitalize_words(t.dataset->canonical_name);
    case 2: return "Towards " + W1 + " " + capitalize_words(t.method->canonical_name) + " and " + W2 + " for " + capitalize_words(t.task->canonical_name);
    case 3: return W1 + ": Combining " + capitalize_words(t.method->canonical_name) + " with " + capitalize_words(t.method2->canonical_name) + " via " + W2;
    default: return "On the " + W1 + " of " + capitalize_words(t.method->canonical_name) + " in " + W2 + " " + capitalize_words(t.task->canonical_name);
  }
}

std::string abstract_sentence(const Topic& t, Rng& rng, std::size_t which) {
  char num[32];
  std::snprintf(num, sizeof num, "%.1f", 60.0 + rng.unit() * 39.0);
  switch (which) {
    case 0: return "We study " + surface(*t.task, rng) + " using " + surface(*t.method, rng) + ".";
    case 1: return "Our approach combines " + surface(*t.method, rng) + " with " + surface(*t.method2, rng) + " and is evaluated on " + surface(*t.dataset, rng) + ".";
    case 2: return "Experiments show gains in " + surface(*t.metric, rng) + " over strong baselines, reaching " + num + " on the test split.";
    case 3: return "Compared to previous systems, the model needs fewer labeled examples for " + surface(*t.task, rng) + ".";
    default: return "This work was done in collaboration with " + surface(*t.org, rng) + ".";
  }
}

std::string body_sentence(const Topic& t, Rng& rng) {
  char num[32];
  std::snprintf(num, sizeof num, "%.2f", rng.unit() * 10.0);
  switch (rng.below(8)) {
    case 0: return capitalize_first(surface(*t.method, rng)) + " is trained end to end with a learning rate of " + num + " e.g. for the larger variants.";
    case 1: return "We evaluate on " + surface(*t.dataset, rng) + " and report " + surface(*t.metric, rng) + ".";
    case 2: return "Unlike " + surface(*t.method2, rng) + ", our variant keeps the number of parameters fixed.";
    case 3: return "The " + surface(*t.task, rng) + " setting follows the standard protocol.";
    case 4: return "An ablation removing " + surface(*t.method2, rng) + " lowers " + surface(*t.metric, rng) + " by " + num + " points.";
    default: return rng.pick(kFillers);
  }
}

}  // namespace

std::vector<Document> synthesize_corpus(const std::vector<Concept>& concepts, SyntheticParams params) {
  if (params.today == Date{}) params.today = today_utc();
  if (params.earliest == Date{}) params.earliest = params.today - std::chrono::days(6 * 365);
  Rng rng(params.seed);

  Pools pools;
  for (const auto& c : concepts) pools.by_type[c.type].push_back(&c);
  const auto& tasks = pools.of(ConceptType::task);
  const auto& methods = pools.of(ConceptType::method);
  const auto& datasets = pools.of(ConceptType::dataset);
  const auto& metrics = pools.of(ConceptType::metric);
  const auto& orgs = pools.of(ConceptType::organization);

  // Author pool with a heavy head so some authors are prolific.
  std::vector<std::string> author_pool;
  std::set<std::string> author_seen;
  while (author_pool.size() < 400) {
    auto name = std::string(rng.pick(kFirstNames)) + " " + rng.pick(kSurnames);
    if (author_seen.insert(name).second) author_pool.push_back(std::move(name));
  }
  auto draw_author = [&]() -> const std::string& {
    const double u = rng.unit();
    return author_pool[static_cast<std::size_t>(std::pow(u, 2.2) * static_cast<double>(author_pool.size()))];
  };

  const auto span_days = (params.today - params.earliest).count();
  std::vector<Date> dates;
  for (std::size_t i = 0; i < params.documents; ++i) {
    if (rng.chance(params.recent_fraction)) {
      dates.push_back(params.today - std::chrono::days(static_cast<int>(rng.below(30))));
    } else {
      dates.push_back(params.earliest + std::chrono::days(static_cast<int>(rng.below(static_cast<std::size_t>(span_days)))));
    }
  }
  std::sort(dates.begin(), dates.end());

  std::vector<std::size_t> id_order(params.documents);
  for (std::size_t i = 0; i < id_order.size(); ++i) id_order[i] = i + 1;
  for (std::size_t i = id_order.size(); i > 1; --i) std::swap(id_order[i - 1], id_order[rng.below(i)]);

  std::set<std::string> used_words;
  std::vector<Document> out;
  std::vector<Topic> topics;
  for (std::size_t i = 0; i < params.documents; ++i) {
    Topic t{};
    // Neighbouring documents in time tend to share a task so citations cluster.
    t.task = (i > 0 && rng.chance(0.3)) ? topics[rng.below(topics.size())].task : rng.pick(tasks);
    t.method = rng.pick(methods);
    t.method2 = rng.pick(methods);
    t.dataset = rng.pick(datasets);
    t.metric = rng.pick(metrics);
    t.org = rng.pick(orgs);

    Document d;
    char id[16];
    std::snprintf(id, sizeof id, "syn-%04zu", id_order[i]);
    d.id = id;
    const auto w1 = pseudo_word(rng, used_words);
    const auto w2 = pseudo_word(rng, used_words);
    d.title = make_title(t, w1, w2, rng);
    const std::size_t n_authors = 1 + rng.below(4);
    for (std::size_t a = 0; a < n_authors; ++a) {
      const auto& name = draw_author();
      if (std::find(d.authors.begin(), d.authors.end(), name) == d.authors.end()) d.authors.push_back(name);
    }
    std::string abstract;
    const std::size_t n_abs = 3 + rng.below(3);
    for (std::size_t s = 0; s < n_abs; ++s) abstract += (s ? " " : "") + abstract_sentence(t, rng, s);
    d.abstract = abstract;

    std::string body;
    const std::size_t n_body = 6 + rng.below(10);
    for (std::size_t s = 0; s < n_body; ++s) body += (s ? " " : "") + body_sentence(t, rng);
    body += " The " + w1 + " component is described below.";

    std::vector<std::string> refs;
    if (i > 0) {
      const std::size_t n_refs = 2 + rng.below(5);
      std::set<std::size_t> cited;
      for (std::size_t r = 0; r < n_refs * 3 && cited.size() < n_refs; ++r) {
        std::size_t j = rng.below(i);
        if (rng.chance(0.5)) {
          for (std::size_t tries = 0; tries < 8; ++tries) {
            const auto cand = rng.below(i);
            if (topics[cand].task == t.task) {
              j = cand;
              break;
            }
          }
        }
        cited.insert(j);
      }
      for (auto j : cited) {
        const auto& src = out[j];
        std::string title = rng.chance(params.typo_rate) ? with_typo(src.title, rng) : src.title;
        const int year = static_cast<int>(std::chrono::year_month_day(src.published_at).year());
        refs.push_back(reference_authors(src.authors) + ". " + title + ". In Proceedings of " + rng.pick(kVenues) +
                       ", " + std::to_string(year) + ".");
      }
    }
    if (rng.chance(0.4)) {
      std::set<std::string> scratch;
      refs.push_back(std::string("R. ") + rng.pick(kSurnames) + " and T. " + rng.pick(kSurnames) + ". " +
                     capitalize_first(pseudo_word(rng, scratch)) + " Methods for " + capitalize_words(rng.pick(tasks)->canonical_name) +
                     ". " + rng.pick(kVenues) + ", " + std::to_string(2000 + rng.below(15)) + ".");
    }
    if (!refs.empty()) {
      body += "\n\nReferences\n";
      for (std::size_t r = 0; r < refs.size(); ++r) body += "[" + std::to_string(r + 1) + "] " + refs[r] + "\n";
    }
    d.body = body;
    d.published_at = dates[i];
    d.version = 1;
    const double age_years = static_cast<double>((params.today - d.published_at).count()) / 365.0;
    d.citation_count = static_cast<std::int64_t>(std::floor(std::exp(rng.unit() * (1.0 + age_years)) - 1.0));
    const double u = rng.unit();
    d.source = u < 0.7 ? Source::arxiv : u < 0.9 ? Source::openreview : u < 0.95 ? Source::blog : Source::other;
    d.categories = {std::string(rng.pick(std::array{"cs.LG", "cs.CL", "cs.CV", "cs.IR", "cs.AI"}))};
    d.url = "https://example.org/papers/" + d.id;
    topics.push_back(t);
    out.push_back(std::move(d));
  }
  std::sort(out.begin(), out.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
  return out;
}

}  // namespace nav
