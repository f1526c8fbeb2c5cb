#include "cdr/prompts.hpp"

namespace cdr::prompts {

std::string render(std::string_view tpl, const std::vector<std::pair<std::string, std::string>>& vars) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        const auto open = tpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        const std::string_view key = tpl.substr(open + 2, close - open - 2);
        out.append(tpl.substr(pos, open - pos));
        bool found = false;
        for (const auto& [k, v] : vars) {
            if (k == key) {
                out += v;
                found = true;
                break;
            }
        }
        if (!found) out.append(tpl.substr(open, close + 2 - open));
        pos = close + 2;
    }
    out.append(tpl.substr(std::min(pos, tpl.size())));
    return out;
}

std::optional<std::string> embedded_note(std::string_view prompt) {
    const auto begin = prompt.find(kNoteBegin);
    const auto end = prompt.rfind(kNoteEnd);
    if (begin == std::string_view::npos || end == std::string_view::npos) return std::nullopt;
    std::size_t from = begin + kNoteBegin.size();
    if (from < prompt.size() && prompt[from] == '\n') ++from;
    std::size_t to = end;
    if (to > from && prompt[to - 1] == '\n') --to;
    if (to < from) return std::nullopt;
    return std::string(prompt.substr(from, to - from));
}

std::optional<std::string> embedded_cdr_id(std::string_view prompt) {
    const auto notebegin = prompt.find(kNoteBegin);
    const std::string_view head = prompt.substr(0, notebegin);
    std::size_t pos = 0;
    while (pos <= head.size()) {
        auto eol = head.find('\n', pos);
        if (eol == std::string_view::npos) eol = head.size();
        const std::string_view line = head.substr(pos, eol - pos);
        if (line.substr(0, kCdrIdPrefix.size()) == kCdrIdPrefix) return std::string(line.substr(kCdrIdPrefix.size()));
        pos = eol + 1;
    }
    return std::nullopt;
}

}  // namespace cdr::prompts
