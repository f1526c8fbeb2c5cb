#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "cdr/eval.hpp"
#include "cdr/prompts.hpp"
#include "cdr/selection.hpp"

namespace cdr {

FeatureTable parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // Blank lines produce a single empty field; skip them.
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started)
                    throw std::runtime_error("line " + std::to_string(line) + ": stray quote inside a field");
                quoted = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r': break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (quoted) throw std::runtime_error("unterminated quoted field");
    if (field_started || !record.empty()) end_record();

    if (records.empty()) throw std::runtime_error("CSV has no header");
    FeatureTable t;
    for (auto& h : records.front()) t.columns.push_back(trim(h));
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.columns.size())
            throw std::runtime_error("row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                                     " fields, expected " + std::to_string(t.columns.size()));
        for (auto& f : records[r]) f = trim(f);
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

FeatureTable read_csv(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_csv(ss.str());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(file.string() + ": " + e.what());
    }
}

SentenceTemplates load_templates(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    try {
        return nlohmann::json::parse(in).get<SentenceTemplates>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed templates " + file.string() + ": " + e.what());
    }
}

namespace {

constexpr const char* kReserved[] = {"cdr_id", "outcome", "age_years", "sex"};

bool reserved(const std::string& col) {
    return std::find(std::begin(kReserved), std::end(kReserved), col) != std::end(kReserved);
}

std::optional<std::size_t> column(const FeatureTable& t, std::string_view name) {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        if (t.columns[i] == name) return i;
    return std::nullopt;
}

std::string cell(const FeatureTable& t, std::size_t row, std::string_view name) {
    auto c = column(t, name);
    return c ? t.rows[row][*c] : std::string();
}

bool outcome_positive(const std::string& raw, std::size_t row) {
    const std::string v = to_lower(raw);
    if (v == "positive" || v == "1" || v == "yes" || v == "true") return true;
    if (v == "negative" || v == "0" || v == "no" || v == "false") return false;
    throw std::invalid_argument("row " + std::to_string(row + 1) + ": outcome '" + raw + "' is not positive/negative");
}

std::string format_age(double age) {
    if (age < 1.0) {
        const int months = std::max(1, static_cast<int>(std::lround(age * 12)));
        return std::to_string(months) + "-month-old";
    }
    std::ostringstream ss;
    ss << (std::floor(age) == age ? static_cast<long>(age) : std::lround(age)) << "-year-old";
    return ss.str();
}

std::string preamble(const FeatureTable& t, std::size_t row) {
    const std::string age_text = cell(t, row, "age_years");
    const std::string sex = to_lower(cell(t, row, "sex"));
    std::string who = sex == "female" || sex == "male" ? sex + " patient" : "patient";
    if (!age_text.empty()) {
        auto age = coerce(age_text, VarType{BaseType::Float, {}});
        if (!age) throw std::invalid_argument("row " + std::to_string(row + 1) + ": bad age '" + age_text + "'");
        const std::string aged = format_age(std::get<double>(*age));
        // "an 8-year-old", "an 11-month-old", "an 18-year-old"
        const bool vowel_sound = aged[0] == '8' || aged.rfind("11-", 0) == 0 || aged.rfind("18-", 0) == 0;
        return (vowel_sound ? "An " : "A ") + aged + " " + who + " presents to the emergency department.";
    }
    return "A " + who + " presents to the emergency department.";
}

NoteMeta meta_of(const FeatureTable& t, std::size_t row) {
    NoteMeta m;
    const std::string age_text = cell(t, row, "age_years");
    if (!age_text.empty())
        if (auto age = coerce(age_text, VarType{BaseType::Float, {}})) m.patient_age_years = std::get<double>(*age);
    const std::string sex = to_lower(cell(t, row, "sex"));
    if (sex == "female" || sex == "male" || sex == "other") m.patient_sex = sex;
    return m;
}

}  // namespace

std::string render_note(const FeatureTable& table, std::size_t row, const SentenceTemplates& templates) {
    std::string note = preamble(table, row);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& feature = table.columns[c];
        if (reserved(feature)) continue;
        const auto& value = table.rows[row][c];
        auto f = templates.find(feature);
        if (f == templates.end()) throw std::invalid_argument("no templates for feature '" + feature + "'");
        auto s = f->second.find(value);
        if (s == f->second.end())
            throw std::invalid_argument("no template for " + feature + " = '" + value + "'");
        note += " " + s->second;
    }
    return note;
}

std::vector<LabeledNote> gen_synthetic(const FeatureTable& table, const SentenceTemplates& templates,
                                       const SyntheticOptions& options) {
    if (table.rows.empty()) throw std::invalid_argument("feature table is empty");
    if (!(options.positive_fraction >= 0.0 && options.positive_fraction <= 1.0))
        throw std::invalid_argument("positive_fraction must be in [0, 1]");
    const auto id_col = column(table, "cdr_id");
    const auto outcome_col = column(table, "outcome");
    if (!id_col || !outcome_col) throw std::invalid_argument("feature table needs cdr_id and outcome columns");

    std::vector<std::size_t> pos, neg;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        (outcome_positive(table.rows[r][*outcome_col], r) ? pos : neg).push_back(r);

    const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(options.n) * options.positive_fraction));
    const std::size_t n_neg = options.n - n_pos;
    if (n_pos > pos.size() || n_neg > neg.size())
        throw std::invalid_argument("need " + std::to_string(n_pos) + " positive and " + std::to_string(n_neg) +
                                    " negative rows, table has " + std::to_string(pos.size()) + " and " +
                                    std::to_string(neg.size()));

    // Fisher-Yates on our own index draw keeps datasets identical across
    // standard libraries for the same seed.
    std::mt19937_64 rng(options.seed);
    auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
    };
    shuffle(pos);
    shuffle(neg);
    std::vector<std::size_t> chosen(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_pos));
    chosen.insert(chosen.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_neg));
    shuffle(chosen);

    std::vector<LabeledNote> out;
    out.reserve(chosen.size());
    const int width = std::max<int>(4, static_cast<int>(std::to_string(chosen.size()).size()));
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        const std::size_t r = chosen[k];
        LabeledNote n;
        std::string num = std::to_string(k + 1);
        n.note_id = "syn-" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0') + num;
        n.note = render_note(table, r, templates);
        if (options.paraphrase) {
            const std::string rewritten = trim(options.paraphrase->complete(
                {"You rewrite clinical notes.",
                 "Rewrite the following clinical note in natural clinical prose. Keep every finding, "
                 "including negative findings, and add nothing.\n\n" +
                     std::string(prompts::kNoteBegin) + "\n" + n.note + "\n" + std::string(prompts::kNoteEnd),
                 0.0}));
            if (!rewritten.empty()) n.note = rewritten;
        }
        n.note_meta = meta_of(table, r);
        const std::string cdr_id = table.rows[r][*id_col];
        n.label_sets = {CdrSet{cdr_id}};
        n.outcome_labels[cdr_id] = outcome_positive(table.rows[r][*outcome_col], r);
        out.push_back(std::move(n));
    }
    return out;
}

}  // namespace cdr
