#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "domodel/llm.hpp"
#include "domodel/metamodel.hpp"
#include "domodel/prompt_assets.hpp"  // generated at configure time from assets/prompts

namespace domodel {

struct PromptInputs {
    std::string system_description;
    std::vector<std::string> class_names;     // relationship tasks
    std::vector<ChatMessage> prior_messages;  // CLASS_TURN2
};

struct PromptSection {
    std::string name;
    std::string text;
};

struct PromptMessage {
    Role role = Role::User;
    std::vector<PromptSection> sections;

    const PromptSection* section(std::string_view name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
};

/// A parsed prompt asset. The asset syntax is plain text with directive
/// lines: `@reconstructed`, `@message <role>` and `@section <name>`.
/// Slots are written `{{description}}`, `{{classes}}`,
/// `{{knowledge.classes}}` and `{{knowledge.inheritance}}`.
struct PromptTemplate {
    TaskKind task = TaskKind::ClassTurn1;
    bool reconstructed = false;
    std::vector<PromptMessage> messages;

    const PromptSection* section(std::string_view name) const {
        for (const auto& m : messages)
            for (const auto& s : m.sections)
                if (s.name == name) return &s;
        return nullptr;
    }

    bool uses_slot(std::string_view slot) const {
        const std::string needle = "{{" + std::string(slot) + "}}";
        for (const auto& m : messages)
            for (const auto& s : m.sections)
                if (s.text.find(needle) != std::string::npos) return true;
        return false;
    }
};

inline std::string prompt_asset_stem(TaskKind task) {
    std::string stem(to_string(task));
    for (auto& c : stem) c = naming_detail::down(c);
    return stem;
}

namespace prompt_detail {

inline constexpr std::array<std::string_view, 4> kSlots = {
    "description", "classes", "knowledge.classes", "knowledge.inheritance"};

inline std::string trim_block(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t start = 0;
    while (start < s.size() && s[start] == '\n') ++start;
    return s.substr(start);
}

inline void check_slots(const std::string& text, TaskKind task) {
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string::npos) {
        auto end = text.find("}}", pos);
        if (end == std::string::npos)
            throw FormatError("unterminated slot in prompt " + prompt_asset_stem(task));
        auto name = std::string_view(text).substr(pos + 2, end - pos - 2);
        if (std::find(kSlots.begin(), kSlots.end(), name) == kSlots.end())
            throw FormatError("unknown slot {{" + std::string(name) + "}} in prompt " +
                              prompt_asset_stem(task));
        pos = end + 2;
    }
}

}  // namespace prompt_detail

inline PromptTemplate parse_prompt_template(TaskKind task, std::string_view text) {
    PromptTemplate tpl;
    tpl.task = task;
    std::istringstream in{std::string(text)};
    std::string line;
    PromptSection* current = nullptr;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "@reconstructed") {
            tpl.reconstructed = true;
        } else if (line.rfind("@message ", 0) == 0) {
            tpl.messages.push_back({parse_role(line.substr(9)), {}});
            current = nullptr;
        } else if (line.rfind("@section ", 0) == 0) {
            if (tpl.messages.empty()) tpl.messages.push_back({Role::User, {}});
            tpl.messages.back().sections.push_back({line.substr(9), {}});
            current = &tpl.messages.back().sections.back();
        } else if (current) {
            current->text += line;
            current->text += '\n';
        } else if (line.find_first_not_of(" \t") != std::string::npos) {
            throw FormatError("text outside a section in prompt " + prompt_asset_stem(task));
        }
    }
    if (tpl.messages.empty()) throw FormatError("prompt " + prompt_asset_stem(task) + " is empty");
    for (auto& m : tpl.messages)
        for (auto& s : m.sections) {
            s.text = prompt_detail::trim_block(std::move(s.text));
            prompt_detail::check_slots(s.text, task);
        }
    return tpl;
}

/// The full set of templates plus the knowledge blocks they embed.
class PromptKit {
public:
    /// Templates compiled in from assets/prompts.
    PromptKit() {
        for (TaskKind t : kAllTasks)
            templates_.emplace(t, parse_prompt_template(t, builtin_prompt_asset(prompt_asset_stem(t) + ".prompt")));
        knowledge_classes_ = prompt_detail::trim_block(std::string(builtin_prompt_asset("knowledge_classes.txt")));
        knowledge_inheritance_ =
            prompt_detail::trim_block(std::string(builtin_prompt_asset("knowledge_inheritance.txt")));
    }

    /// Built-ins overridden by any `<task>.prompt` / `knowledge_*.txt` in `dir`.
    static PromptKit from_directory(const std::filesystem::path& dir) {
        PromptKit kit;
        auto slurp = [](const std::filesystem::path& p) {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        for (TaskKind t : kAllTasks) {
            auto p = dir / (prompt_asset_stem(t) + ".prompt");
            if (std::filesystem::exists(p)) kit.templates_[t] = parse_prompt_template(t, slurp(p));
        }
        if (auto p = dir / "knowledge_classes.txt"; std::filesystem::exists(p))
            kit.knowledge_classes_ = prompt_detail::trim_block(slurp(p));
        if (auto p = dir / "knowledge_inheritance.txt"; std::filesystem::exists(p))
            kit.knowledge_inheritance_ = prompt_detail::trim_block(slurp(p));
        return kit;
    }

    const PromptTemplate& get(TaskKind task) const { return templates_.at(task); }

    /// Modeling knowledge injected into CLASS_TURN1 and INHERITANCE.
    const std::string& knowledge_block(TaskKind task) const {
        if (task == TaskKind::ClassTurn1) return knowledge_classes_;
        if (task == TaskKind::Inheritance) return knowledge_inheritance_;
        throw NoKnowledge("task " + std::string(to_string(task)) + " carries no knowledge block");
    }

    std::vector<ChatMessage> render(TaskKind task, const PromptInputs& in) const {
        const auto& tpl = get(task);
        std::vector<ChatMessage> out;
        if (task == TaskKind::ClassTurn2) {
            if (in.prior_messages.empty())
                throw MissingInput("CLASS_TURN2 needs the first-round conversation");
            out = in.prior_messages;
        }
        if (tpl.uses_slot("description") && in.system_description.empty())
            throw MissingInput(std::string(to_string(task)) + " needs a system description");
        const bool needs_classes = task == TaskKind::AssocAgg || task == TaskKind::Inheritance ||
                                   task == TaskKind::RelCombined || tpl.uses_slot("classes");
        if (needs_classes && in.class_names.empty())
            throw MissingInput(std::string(to_string(task)) + " needs class names");

        std::string class_list;
        for (std::size_t i = 0; i < in.class_names.size(); ++i) {
            if (i) class_list += ", ";
            class_list += in.class_names[i];
        }
        const std::map<std::string_view, std::string_view> values = {
            {"description", in.system_description},
            {"classes", class_list},
            {"knowledge.classes", knowledge_classes_},
            {"knowledge.inheritance", knowledge_inheritance_},
        };
        for (const auto& msg : tpl.messages) {
            std::string content;
            for (const auto& s : msg.sections) {
                if (!content.empty()) content += "\n\n";
                content += fill(s.text, values);
            }
            out.push_back({msg.role, std::move(content)});
        }
        return out;
    }

private:
    // Single left-to-right pass, so slot-like text inside a value stays verbatim.
    static std::string fill(const std::string& text,
                            const std::map<std::string_view, std::string_view>& values) {
        std::string out;
        std::size_t pos = 0;
        while (true) {
            auto open = text.find("{{", pos);
            if (open == std::string::npos) break;
            auto close = text.find("}}", open);
            out.append(text, pos, open - pos);
            out += values.at(std::string_view(text).substr(open + 2, close - open - 2));
            pos = close + 2;
        }
        out.append(text, pos);
        return out;
    }

    std::map<TaskKind, PromptTemplate> templates_;
    std::string knowledge_classes_;
    std::string knowledge_inheritance_;
};

inline const PromptKit& default_prompt_kit() {
    static const PromptKit kit;
    return kit;
}

inline std::vector<ChatMessage> render(TaskKind task, const PromptInputs& inputs) {
    return default_prompt_kit().render(task, inputs);
}

inline const std::string& knowledge_block(TaskKind task) {
    return default_prompt_kit().knowledge_block(task);
}

}  // namespace domodel
