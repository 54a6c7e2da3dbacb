#include "data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>

#include "rng.hpp"
#include "vocab.hpp"

namespace selfsynth {

namespace {

using nlohmann::json;

const std::vector<std::string> kPersons = {"tom", "ann", "sam", "mia"};
const std::vector<std::string> kItems = {"apples", "cards", "pens", "coins"};

void extend(std::vector<std::string>& out, std::initializer_list<std::string> words) {
    out.insert(out.end(), words.begin(), words.end());
}

// Operand values are small primes: products then factor uniquely, so a
// sampled program can only reach the gold answer through the task's own
// numerals (up to benign rearrangement), never through a lookalike pair.
const std::vector<int> kNumerals = {2, 3, 5, 7, 11};

std::string num(Rng& rng) { return std::to_string(kNumerals[rng.below(kNumerals.size())]); }

bool is_numeral_value(double v) {
    for (int n : kNumerals) {
        if (v == static_cast<double>(n)) return true;
    }
    return false;
}

std::vector<std::string> person_triple(Rng& rng) {
    std::vector<std::string> p = kPersons;
    rng.shuffle(p);
    return p;
}

struct TemplateDef {
    std::string id;
    int lines;
    // fills nl and the program source from one rng draw
    std::function<void(Rng&, std::vector<std::string>&, std::string&)> fill;
};

// Answers are kept dispersed (products, powers, halves) so that distinct
// operand draws rarely collide on the same result, and formulas over
// several operands stay commutative; both choices keep self-sampled
// coincidences from flooding buffers with misleading programs. The NL
// surface is built from a small clause lexicon shared across templates, so
// a held-out template is a new combination of seen clauses rather than new
// vocabulary. Gold styles deliberately mix verbose load-then-compute
// chains with compact literal forms so that several correct programs exist
// per specification.
std::vector<TemplateDef> build_library() {
    std::vector<TemplateDef> lib;

    struct Slots {
        std::string p, it, a, b, c, e;
    };
    auto draw = [](Rng& rng) {
        Slots s;
        s.p = kPersons[rng.below(kPersons.size())];
        s.it = kItems[rng.below(kItems.size())];
        // distinct operands: repeats would let squared or swapped variants
        // of other formulas land on the same answer
        do {
            s.a = num(rng);
            s.b = num(rng);
            s.c = num(rng);
        } while (s.a == s.b || s.b == s.c || s.a == s.c);
        s.e = std::to_string(rng.below(2) + 2);  // exponent "2" or "3"
        return s;
    };

    // clause lexicon
    auto has = [](std::vector<std::string>& nl, const Slots& s, const std::string& n) {
        extend(nl, {s.p, "has", n, s.it, "."});
    };
    auto boxes = [](std::vector<std::string>& nl, const Slots& s) {
        extend(nl, {s.p, "has", s.a, "boxes", "of", s.it, "."});
    };
    auto each_box = [](std::vector<std::string>& nl, const Slots& s, const std::string& n) {
        extend(nl, {"each", "box", "holds", n, s.it, "."});
    };
    auto rows = [](std::vector<std::string>& nl, const Slots& s) {
        extend(nl, {s.p, "packs", s.a, "rows", "of", s.it, "."});
    };
    auto each_row = [](std::vector<std::string>& nl, const Slots& s, const std::string& n) {
        extend(nl, {"each", "row", "holds", n, s.it, "."});
    };
    auto crates = [](std::vector<std::string>& nl, const Slots& s) {
        extend(nl, {s.p, "stacks", s.a, "crates", "."});
    };
    auto each_crate = [](std::vector<std::string>& nl, const Slots& s) {
        extend(nl, {"each", "crate", "has", s.b, "boxes", "."});
    };
    auto gets = [](std::vector<std::string>& nl, const Slots& s, const std::string& n) {
        extend(nl, {s.p, "gets", n, "more", s.it, "."});
    };
    auto grow = [](std::vector<std::string>& nl, const std::string& n) {
        extend(nl, {"the", "pile", "grows", n, "times", "."});
    };
    auto spare = [](std::vector<std::string>& nl, const Slots& s, const std::string& n) {
        extend(nl, {"there", "are", n, "spare", s.it, "."});
    };
    auto square = [](std::vector<std::string>& nl, const Slots& s) {
        extend(nl, {"a", "square", "patch", "has", s.a, s.it, "per", "side", "."});
    };
    auto power = [](std::vector<std::string>& nl, const Slots& s) {
        extend(nl, {"the", "pile", "starts", "at", s.a, "and", "is", "raised", "to", "the",
                    "power", s.e, "."});
    };
    auto half = [](std::vector<std::string>& nl) {
        extend(nl, {"keep", "half", "of", "the", "pile", "."});
    };
    auto q_all = [](std::vector<std::string>& nl, const Slots& s) {
        extend(nl, {"how", "many", s.it, "in", "all", "?"});
    };
    auto q_now = [](std::vector<std::string>& nl, const Slots& s) {
        extend(nl, {"how", "many", s.it, "now", "?"});
    };
    auto q_pile = [](std::vector<std::string>& nl) {
        extend(nl, {"how", "big", "is", "the", "pile", "?"});
    };

    auto loads2 = [](const Slots& s) { return "n0=" + s.a + "\nn1=" + s.b + "\n"; };
    auto loads3 = [](const Slots& s) {
        return "n0=" + s.a + "\nn1=" + s.b + "\nn2=" + s.c + "\n";
    };

    // verbose one-step templates
    lib.push_back({"box_mul", 4, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        boxes(nl, s), each_box(nl, s, s.b), q_all(nl, s);
        src = loads2(s) + "t0=n0*n1\nanswer=t0";
    }});

    lib.push_back({"row_mul", 4, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        rows(nl, s), each_row(nl, s, s.b), q_all(nl, s);
        src = loads2(s) + "t0=n0*n1\nanswer=t0";
    }});

    lib.push_back({"grow_mul", 4, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        has(nl, s, s.a), grow(nl, s.b), q_now(nl, s);
        src = loads2(s) + "t0=n0*n1\nanswer=t0";
    }});

    lib.push_back({"gets_add", 4, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        has(nl, s, s.a), gets(nl, s, s.b), q_now(nl, s);
        src = loads2(s) + "t0=n0+n1\nanswer=t0";
    }});

    // verbose two-step chains
    lib.push_back({"crate_chain", 6,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        crates(nl, s), each_crate(nl, s), each_box(nl, s, s.c), q_all(nl, s);
        src = loads3(s) + "t0=n0*n1\nt1=t0*n2\nanswer=t1";
    }});

    lib.push_back({"box_grow", 6, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        boxes(nl, s), each_box(nl, s, s.b), grow(nl, s.c), q_now(nl, s);
        src = loads3(s) + "t0=n0*n1\nt1=t0*n2\nanswer=t1";
    }});

    lib.push_back({"row_grow", 6, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        rows(nl, s), each_row(nl, s, s.b), grow(nl, s.c), q_now(nl, s);
        src = loads3(s) + "t0=n0*n1\nt1=t0*n2\nanswer=t1";
    }});

    lib.push_back({"box_spare", 6, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        boxes(nl, s), each_box(nl, s, s.b), spare(nl, s, s.c), q_all(nl, s);
        src = loads3(s) + "t0=n0*n1\nt1=t0+n2\nanswer=t1";
    }});

    lib.push_back({"row_spare", 6, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        rows(nl, s), each_row(nl, s, s.b), spare(nl, s, s.c), q_all(nl, s);
        src = loads3(s) + "t0=n0*n1\nt1=t0+n2\nanswer=t1";
    }});

    lib.push_back({"gets_grow", 6, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        has(nl, s, s.a), gets(nl, s, s.b), grow(nl, s.c), q_now(nl, s);
        src = loads3(s) + "t0=n0+n1\nt1=t0*n2\nanswer=t1";
    }});

    lib.push_back({"brings_sum", 6,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const auto p = person_triple(rng);
        const Slots s = draw(rng);
        extend(nl, {p[0], "has", s.a, s.it, "."});
        extend(nl, {p[1], "brings", s.b, s.it, "."});
        extend(nl, {p[2], "brings", s.c, s.it, "."});
        q_all(nl, s);
        src = loads3(s) + "t0=n0+n1\nt1=t0+n2\nanswer=t1";
    }});

    // verbose squares, powers, halves
    lib.push_back({"square_v", 3, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        square(nl, s), q_all(nl, s);
        src = "n0=" + s.a + "\nt0=n0*n0\nanswer=t0";
    }});

    lib.push_back({"square_spare", 5,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        square(nl, s), spare(nl, s, s.b), q_all(nl, s);
        src = loads2(s) + "t0=n0*n0\nanswer=t0+n1";
    }});

    lib.push_back({"square_grow", 5,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        square(nl, s), grow(nl, s.b), q_now(nl, s);
        src = loads2(s) + "t0=n0*n0\nanswer=t0*n1";
    }});

    lib.push_back({"power_v", 4, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        power(nl, s), q_pile(nl);
        src = "n0=" + s.a + "\nn1=" + s.e + "\nt0=n0**n1\nanswer=t0";
    }});

    lib.push_back({"box_half", 5, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        boxes(nl, s), each_box(nl, s, s.b), half(nl), q_now(nl, s);
        src = loads2(s) + "t0=n0*n1\nanswer=t0/2";
    }});

    lib.push_back({"gets_half", 5, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        has(nl, s, s.a), gets(nl, s, s.b), half(nl), q_now(nl, s);
        src = loads2(s) + "t0=n0+n1\nanswer=t0/2";
    }});

    // compact forms of the same clause combinations: literals appear
    // straight in the computation
    lib.push_back({"box_mul_c", 2, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        boxes(nl, s), each_box(nl, s, s.b), q_all(nl, s);
        src = "t0=" + s.a + "*" + s.b + "\nanswer=t0";
    }});

    lib.push_back({"square_c", 2, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        square(nl, s), q_all(nl, s);
        src = "t0=" + s.a + "*" + s.a + "\nanswer=t0";
    }});

    lib.push_back({"power_c", 2, [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        power(nl, s), q_pile(nl);
        src = "t0=" + s.a + "**" + s.e + "\nanswer=t0";
    }});

    lib.push_back({"crate_chain_c", 3,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        crates(nl, s), each_crate(nl, s), each_box(nl, s, s.c), q_all(nl, s);
        src = "t0=" + s.a + "*" + s.b + "\nanswer=t0*" + s.c;
    }});

    lib.push_back({"row_grow_c", 3,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        rows(nl, s), each_row(nl, s, s.b), grow(nl, s.c), q_now(nl, s);
        src = "t0=" + s.a + "*" + s.b + "\nanswer=t0*" + s.c;
    }});

    lib.push_back({"box_spare_c", 3,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        boxes(nl, s), each_box(nl, s, s.b), spare(nl, s, s.c), q_all(nl, s);
        src = "t0=" + s.a + "*" + s.b + "\nanswer=t0+" + s.c;
    }});

    lib.push_back({"gets_grow_c", 3,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        has(nl, s, s.a), gets(nl, s, s.b), grow(nl, s.c), q_now(nl, s);
        src = "t0=" + s.a + "+" + s.b + "\nanswer=t0*" + s.c;
    }});

    lib.push_back({"box_half_c", 3,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        boxes(nl, s), each_box(nl, s, s.b), half(nl), q_now(nl, s);
        src = "t0=" + s.a + "*" + s.b + "\nanswer=t0/2";
    }});

    lib.push_back({"square_spare_c", 3,
                   [=](Rng& rng, std::vector<std::string>& nl, std::string& src) {
        const Slots s = draw(rng);
        square(nl, s), spare(nl, s, s.b), q_all(nl, s);
        src = "t0=" + s.a + "*" + s.a + "\nanswer=t0+" + s.b;
    }});

    return lib;
}

const std::vector<TemplateDef>& library() {
    static const std::vector<TemplateDef> lib = build_library();
    return lib;
}

std::string json_type_error(size_t line_no, const std::string& what) {
    return "line " + std::to_string(line_no) + ": " + what;
}

}  // namespace

int template_library_size() { return static_cast<int>(library().size()); }

std::vector<Task> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open task file: " + path);

    std::vector<Task> tasks;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecord(json_type_error(line_no, e.what()));
        }
        if (!rec.is_object() || !rec.contains("id") || !rec.contains("nl") ||
            !rec.contains("program") || !rec["id"].is_string() || !rec["nl"].is_string() ||
            !rec["program"].is_string()) {
            throw MalformedRecord(json_type_error(
                line_no, "expected an object with string fields id, nl, program"));
        }

        Task t;
        t.id = rec["id"].get<std::string>();
        if (rec.contains("template_id")) {
            if (!rec["template_id"].is_string()) {
                throw MalformedRecord(json_type_error(line_no, "template_id must be a string"));
            }
            t.template_id = rec["template_id"].get<std::string>();
        } else {
            t.template_id = t.id;
        }
        t.nl = split_words(rec["nl"].get<std::string>());

        try {
            t.gold = parse(rec["program"].get<std::string>());
        } catch (const Error& e) {
            throw MalformedRecord(json_type_error(line_no, e.what()));
        }
        const ExecResult res = execute(t.gold);
        if (!res.ok()) {
            throw GoldExecutionFailure("task " + t.id + ": gold program failed: " +
                                       exec_status_name(res.status));
        }
        t.gold_result = res.answer;
        tasks.push_back(std::move(t));
    }
    return tasks;
}

void save_jsonl(const std::string& path, const std::vector<Task>& tasks) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open task file for writing: " + path);
    for (const Task& t : tasks) {
        std::string nl;
        for (size_t i = 0; i < t.nl.size(); ++i) {
            if (i) nl += ' ';
            nl += t.nl[i];
        }
        json rec;
        rec["id"] = t.id;
        rec["template_id"] = t.template_id;
        rec["nl"] = nl;
        rec["program"] = pretty_print(t.gold);
        out << rec.dump() << '\n';
    }
    if (!out) throw IoError("failed writing task file: " + path);
}

std::vector<Task> synth_generate(uint64_t seed, int n_tasks, int max_lines, int n_templates) {
    if (max_lines < 2) throw InvalidArguments("max_lines must be at least 2");
    if (n_tasks < 0 || n_templates < 0) throw InvalidArguments("counts must be nonnegative");

    std::vector<const TemplateDef*> chosen;
    for (const TemplateDef& t : library()) {
        if (t.lines <= max_lines) chosen.push_back(&t);
    }
    if (n_templates > 0) {
        if (static_cast<size_t>(n_templates) > chosen.size()) {
            throw InvalidArguments("only " + std::to_string(chosen.size()) +
                                   " templates fit within " + std::to_string(max_lines) +
                                   " lines");
        }
        chosen.resize(n_templates);
    }

    std::vector<Task> tasks;
    tasks.reserve(n_tasks);
    for (int i = 0; i < n_tasks; ++i) {
        const TemplateDef& tmpl = *chosen[i % chosen.size()];
        Rng rng(derive_stream(seed, static_cast<uint64_t>(i), 0));

        Task t;
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "synth-%04d", i);
        t.id = idbuf;
        t.template_id = tmpl.id;
        for (int attempt = 0;; ++attempt) {
            t.nl.clear();
            std::string src;
            tmpl.fill(rng, t.nl, src);
            t.gold = parse(src);
            const ExecResult res = execute(t.gold);
            // an answer equal to a numeral token would make a bare literal
            // a correct program; redraw so that shortcut never exists
            if (res.ok() && !is_numeral_value(res.answer)) {
                t.gold_result = res.answer;
                break;
            }
            if (attempt > 200) {
                throw InvalidArguments("template " + tmpl.id + " cannot instantiate");
            }
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::pair<std::vector<Task>, std::vector<Task>> split_by_template(const std::vector<Task>& tasks,
                                                                  double dev_fraction,
                                                                  uint64_t seed) {
    if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
        throw InvalidArguments("dev_fraction must lie in (0, 1)");
    }

    std::vector<std::string> ids;  // first-appearance order
    for (const Task& t : tasks) {
        if (std::find(ids.begin(), ids.end(), t.template_id) == ids.end()) {
            ids.push_back(t.template_id);
        }
    }
    if (ids.size() < 2) {
        throw TooFewTemplates("need at least 2 templates to split, have " +
                              std::to_string(ids.size()));
    }

    const auto n = static_cast<double>(ids.size());
    auto n_dev = static_cast<size_t>(std::llround(dev_fraction * n));
    n_dev = std::max<size_t>(1, std::min(n_dev, ids.size() - 1));

    Rng rng(splitmix64(seed ^ 0x73706c6974ull));  // "split"
    rng.shuffle(ids);
    const std::set<std::string> dev_ids(ids.begin(), ids.begin() + static_cast<long>(n_dev));

    std::pair<std::vector<Task>, std::vector<Task>> out;
    for (const Task& t : tasks) {
        (dev_ids.count(t.template_id) ? out.second : out.first).push_back(t);
    }
    return out;
}

}  // namespace selfsynth
