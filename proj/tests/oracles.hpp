#pragma once

// Independent reference implementations used as test oracles. These are
// written straight from the published rules and the metric definitions,
// without touching the interpreter or the production metric code.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline std::string nexus(bool focal, bool midline, bool altered, bool intox, bool distracting) {
    return focal || midline || altered || intox || distracting ? "imaging recommended" : "imaging not necessary";
}

inline std::string pecarn_tbi(bool under_2, std::int64_t gcs, bool ams, bool palpable_fx, bool basilar_fx,
                              bool scalp_hematoma, bool loc, bool severe_mech, bool not_normal, bool vomiting,
                              bool severe_headache) {
    if (under_2) {
        if (gcs <= 14) return "CT recommended";
        if (ams) return "CT recommended";
        if (palpable_fx) return "CT recommended";
        if (scalp_hematoma) return "observation versus CT";
        if (loc) return "observation versus CT";
        if (severe_mech) return "observation versus CT";
        if (not_normal) return "observation versus CT";
        return "CT not recommended";
    }
    if (gcs <= 14) return "CT recommended";
    if (ams) return "CT recommended";
    if (basilar_fx) return "CT recommended";
    if (loc) return "observation versus CT";
    if (vomiting) return "observation versus CT";
    if (severe_mech) return "observation versus CT";
    if (severe_headache) return "observation versus CT";
    return "CT not recommended";
}

inline std::string pecarn_iai(bool wall, std::int64_t gcs, bool tender, bool thoracic, bool pain, bool breath,
                              bool vomiting) {
    int findings = 0;
    findings += wall;
    findings += gcs < 14;
    findings += tender;
    findings += thoracic;
    findings += pain;
    findings += breath;
    findings += vomiting;
    return findings > 0 ? "CT may be indicated" : "very low risk, CT not recommended";
}

// ---- metrics --------------------------------------------------------------

using Ids = std::vector<std::string>;

struct Note {
    std::string id;
    std::vector<Ids> label_sets;
    std::map<std::string, bool> outcome_truth;
};

struct Answer {
    std::string id;
    Ids selected;
    std::map<std::string, bool> outcome_positive;
    bool failed = false;
};

inline Ids sorted(Ids v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline double ea(const std::vector<Answer>& a, const std::vector<Note>& n) {
    int hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].failed) continue;
        bool any = false;
        for (const auto& ls : n[i].label_sets) any = any || sorted(ls) == sorted(a[i].selected);
        hits += any;
    }
    return double(hits) / double(a.size());
}

/// Walks every candidate of the space explicitly with a binary decision.
inline double f1(const std::vector<Answer>& a, const std::vector<Note>& n, const Ids& registry) {
    Ids candidates = registry;
    candidates.push_back("NO_CDR");
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto says = [&](const Ids& set, const std::string& c) {
            if (c == "NO_CDR") return set.empty();
            return std::find(set.begin(), set.end(), c) != set.end();
        };
        long best_tp = 0, best_fp = 0, best_fn = 0;
        double best = -1;
        for (const auto& ls : n[i].label_sets) {
            long t = 0, p = 0, f = 0;
            for (const auto& c : candidates) {
                const bool pred = !a[i].failed && says(a[i].selected, c);
                const bool gold = says(ls, c);
                if (pred && gold) ++t;
                if (pred && !gold) ++p;
                if (!pred && gold) ++f;
            }
            const double score = (2 * t + p + f) == 0 ? 1.0 : 2.0 * t / double(2 * t + p + f);
            if (score > best) {
                best = score;
                best_tp = t;
                best_fp = p;
                best_fn = f;
            }
        }
        tp += best_tp;
        fp += best_fp;
        fn += best_fn;
    }
    return (2 * tp + fp + fn) == 0 ? 1.0 : 2.0 * double(tp) / double(2 * tp + fp + fn);
}

struct Confusion {
    long tp = 0, fn = 0, tn = 0, fp = 0;
    std::optional<double> sens() const {
        return tp + fn ? std::optional<double>(double(tp) / double(tp + fn)) : std::nullopt;
    }
    std::optional<double> spec() const {
        return tn + fp ? std::optional<double>(double(tn) / double(tn + fp)) : std::nullopt;
    }
};

inline Confusion confusion(const std::vector<Answer>& a, const std::vector<Note>& n) {
    Confusion c;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].failed) continue;
        for (const auto& [cdr, truth] : n[i].outcome_truth) {
            const bool predicted = std::count(a[i].selected.begin(), a[i].selected.end(), cdr) > 0;
            bool labeled = false;
            for (const auto& ls : n[i].label_sets) labeled = labeled || std::count(ls.begin(), ls.end(), cdr) > 0;
            if (!predicted || !labeled) continue;
            auto it = a[i].outcome_positive.find(cdr);
            if (it == a[i].outcome_positive.end()) continue;
            const bool pos = it->second;
            if (truth && pos) ++c.tp;
            if (truth && !pos) ++c.fn;
            if (!truth && !pos) ++c.tn;
            if (!truth && pos) ++c.fp;
        }
    }
    return c;
}

}  // namespace oracle
