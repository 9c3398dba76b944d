#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "flowplan/gateway.hpp"
#include "flowplan/graph.hpp"
#include "flowplan/plan.hpp"

namespace flowplan {

// ---------------------------------------------------------------------------
// Section templates (patent boilerplate)
// ---------------------------------------------------------------------------

struct SectionTemplate {
    SectionId section = SectionId::Field;
    std::string instruction_text;
    std::vector<std::string> boilerplate_openers;
    std::vector<std::string> few_shot_refs;
};

inline SectionTemplate default_template(SectionId section) {
    SectionTemplate t;
    t.section = section;
    switch (section) {
        case SectionId::Field:
            t.boilerplate_openers = {"The present invention relates to"};
            t.instruction_text =
                "Write the Field of the Invention paragraph of a patent "
                "description from the concepts and relations below. Begin "
                "with \"The present invention relates to ...\". Prioritize "
                "conciseness and technical specificity.";
            break;
        case SectionId::Background:
            t.boilerplate_openers = {
                "However, such technology has the following problems"};
            t.instruction_text =
                "Write the Background paragraph of a patent description from "
                "the concepts and relations below. Frame the problem "
                "explicitly, referencing the prior art with \"According to "
                "the prior art ...\" and highlighting drawbacks with "
                "\"However, such technology has the following problems ...\".";
            break;
        case SectionId::Summary:
            t.boilerplate_openers = {
                "An object of the present invention is to provide"};
            t.instruction_text =
                "Write the Summary paragraph of a patent description from "
                "the concepts and relations below. State \"An object of the "
                "present invention is to provide ...\".";
            break;
        case SectionId::DetailedDescription:
            t.boilerplate_openers = {
                "According to one embodiment of the present invention"};
            t.instruction_text =
                "Write the Detailed Description of a patent from the "
                "concepts and relations below. Elaborate with \"According to "
                "one embodiment of the present invention ...\" and include "
                "multiple embodiments introduced by \"In another embodiment "
                "...\". Repeat key ideas across embodiments.";
            break;
        case SectionId::Effects:
            t.boilerplate_openers = {
                "Therefore, according to the present invention"};
            t.instruction_text =
                "Write the Effects paragraph of a patent description from "
                "the concepts and relations below. Conclude with "
                "\"Therefore, according to the present invention, the effect "
                "is ...\".";
            break;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Few-shot exemplar store
// ---------------------------------------------------------------------------

// A directory of files named <Section>__<name>.txt, each holding an input
// and an output separated by a line containing only "---". Empty or missing
// stores are first-class.
class FewShotStore {
public:
    FewShotStore() = default;
    explicit FewShotStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::vector<std::pair<std::string, std::string>> exemplars(
        SectionId section) const {
        std::vector<std::pair<std::string, std::string>> out;
        if (dir_.empty() || !std::filesystem::is_directory(dir_)) return out;
        std::string prefix = std::string(to_string(section)) + "__";
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
            if (entry.path().filename().string().starts_with(prefix))
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& path : files) {
            std::ifstream in(path, std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            std::string content = buf.str();
            size_t sep = content.find("\n---\n");
            if (sep == std::string::npos) continue;
            out.emplace_back(content.substr(0, sep), content.substr(sep + 5));
        }
        return out;
    }

private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Prompt assembly (Eq.-style [instruction; linearized subgraph])
// ---------------------------------------------------------------------------

inline PromptRequest assemble_prompt(const ConceptGraph& section_subgraph,
                                     const SectionTemplate& tmpl,
                                     const FewShotStore& few_shot_store) {
    if (section_subgraph.nodes.empty())
        throw std::invalid_argument("cannot assemble prompt for empty section");
    PromptRequest req;
    req.tag = "generate";
    req.system_text = tmpl.instruction_text;
    bool has_figure = false;
    for (const auto& n : section_subgraph.nodes)
        if (n.category == Category::Figure) has_figure = true;
    if (has_figure) {
        req.system_text +=
            " Refer to figures explicitly, e.g. \"As shown in Figure 1\".";
    }
    req.user_text = linearize(section_subgraph);
    req.few_shot = few_shot_store.exemplars(tmpl.section);
    return req;
}

// ---------------------------------------------------------------------------
// Token-level coverage
// ---------------------------------------------------------------------------

inline const std::set<std::string>& coverage_stopwords() {
    static const std::set<std::string> words = {
        "a",  "an",  "the", "of",   "to",   "in",  "for", "on",
        "with", "and", "or", "is",  "are",  "by",  "at",  "as",
        "be", "this", "that", "from", "it", "its"};
    return words;
}

struct CoverageResult {
    double coverage = 1.0;
    std::vector<std::string> missing_concepts;
};

// A node counts as covered when at least 60% of its label's content tokens
// appear in the paragraph.
inline CoverageResult token_coverage(const std::string& paragraph_text,
                                     const ConceptGraph& subgraph) {
    auto text_tokens_vec = tokenize(paragraph_text);
    std::set<std::string> text_tokens(text_tokens_vec.begin(),
                                      text_tokens_vec.end());
    CoverageResult result;
    size_t total = 0, covered = 0;
    for (const auto& n : subgraph.nodes) {
        if (n.placeholder) continue;
        ++total;
        std::vector<std::string> content;
        for (const auto& tok : tokenize(n.label))
            if (!coverage_stopwords().count(tok)) content.push_back(tok);
        bool node_covered;
        if (content.empty()) {
            node_covered = true;
        } else {
            size_t hits = 0;
            for (const auto& tok : content)
                if (text_tokens.count(tok)) ++hits;
            node_covered = static_cast<double>(hits) >=
                           0.6 * static_cast<double>(content.size());
        }
        if (node_covered) ++covered;
        else result.missing_concepts.push_back(n.label);
    }
    result.coverage = total == 0 ? 1.0
                                 : static_cast<double>(covered) /
                                       static_cast<double>(total);
    return result;
}

// ---------------------------------------------------------------------------
// Entailment judging
// ---------------------------------------------------------------------------

inline std::optional<int> first_integer(const std::string& text) {
    for (size_t i = 0; i < text.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(text[i]))) {
            size_t end = i;
            while (end < text.size() &&
                   std::isdigit(static_cast<unsigned char>(text[end])))
                ++end;
            return std::stoi(text.substr(i, end - i));
        }
    }
    return std::nullopt;
}

struct EntailmentResult {
    double score = 0.0;
    std::string justification;
};

inline EntailmentResult entailment_check(const std::string& paragraph_text,
                                         const ConceptGraph& subgraph,
                                         Gateway& gateway,
                                         std::vector<std::string>& warnings) {
    PromptRequest req;
    req.tag = "judge";
    req.system_text =
        "You judge whether a patent paragraph faithfully conveys the "
        "concepts and relations listed. Reply with a fidelity score from 0 "
        "to 100 followed by a one-line justification.";
    req.user_text = "[Concepts]\n" + linearize(subgraph) + "\n[Paragraph]\n" +
                    paragraph_text;
    std::string reply = gateway.complete(req).text;
    auto value = first_integer(reply);
    if (!value) {
        PromptRequest retry = req;
        retry.user_text +=
            "\nYour previous reply contained no score. Reply with an integer "
            "score 0-100 first.";
        reply = gateway.complete(retry).text;
        value = first_integer(reply);
    }
    EntailmentResult result;
    if (!value) {
        warnings.push_back("judge: no score parsed; recording 0.0");
        result.score = 0.0;
    } else {
        result.score = std::clamp(*value, 0, 100) / 100.0;
    }
    result.justification = reply;
    return result;
}

// ---------------------------------------------------------------------------
// Section generation with bounded regeneration
// ---------------------------------------------------------------------------

struct GeneratorConfig {
    double threshold_entail = 0.7;
    double threshold_cover = 0.8;
    int max_attempts = 3;
};

struct DraftParagraph {
    SectionId section = SectionId::Field;
    std::string text;
    int attempts = 1;
    double entailment_score = 0.0;
    double coverage = 0.0;
    std::vector<std::string> missing_concepts;
    bool flagged = false;
};

struct DraftDocument {
    std::vector<DraftParagraph> paragraphs;
    std::vector<SectionId> skipped_sections;
};

inline DraftParagraph generate_section(const SectionAssignment& assignment,
                                       const ConceptGraph& graph,
                                       const SectionTemplate& tmpl,
                                       const FewShotStore& store,
                                       Gateway& gateway,
                                       const GeneratorConfig& config,
                                       std::vector<std::string>& warnings) {
    if (assignment.node_ids.empty())
        throw std::invalid_argument("generate_section: empty section");
    std::set<std::string> ids(assignment.node_ids.begin(),
                              assignment.node_ids.end());
    ConceptGraph subgraph = induced_subgraph(graph, ids);

    DraftParagraph best;
    best.section = assignment.section;
    double best_total = -1.0;
    std::vector<std::string> prior_missing;
    std::string prior_justification;

    for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
        PromptRequest req = assemble_prompt(subgraph, tmpl, store);
        if (attempt >= 2) {
            std::string guidance =
                "\n\n[Corrective guidance from the previous attempt]\n";
            if (!prior_missing.empty()) {
                guidance += "Missing concepts that must appear:\n";
                for (const auto& label : prior_missing)
                    guidance += "- " + label + "\n";
            }
            if (!prior_justification.empty())
                guidance += "Judge feedback: " + prior_justification + "\n";
            req.user_text += guidance;
        }
        std::string text = gateway.complete(req).text;
        CoverageResult cov = token_coverage(text, subgraph);
        EntailmentResult ent =
            entailment_check(text, subgraph, gateway, warnings);

        double total = ent.score + cov.coverage;
        if (total > best_total) {
            best_total = total;
            best.text = text;
            best.attempts = attempt;
            best.entailment_score = ent.score;
            best.coverage = cov.coverage;
            best.missing_concepts = cov.missing_concepts;
        }
        if (ent.score >= config.threshold_entail &&
            cov.coverage >= config.threshold_cover) {
            best.text = text;
            best.attempts = attempt;
            best.entailment_score = ent.score;
            best.coverage = cov.coverage;
            best.missing_concepts = cov.missing_concepts;
            best.flagged = false;
            return best;
        }
        prior_missing = cov.missing_concepts;
        prior_justification = ent.justification;
        best.attempts = attempt;
    }
    best.flagged = true;
    warnings.push_back("generate: section " +
                       std::string(to_string(assignment.section)) +
                       " exhausted attempts; best attempt kept (flagged)");
    return best;
}

inline DraftDocument generate_document(const Plan& plan,
                                       const ConceptGraph& graph,
                                       Gateway& gateway,
                                       const GeneratorConfig& config,
                                       const FewShotStore& store,
                                       std::vector<std::string>& warnings) {
    DraftDocument doc;
    for (size_t i = 0; i < plan.order.size(); ++i) {
        const auto& assignment = plan.ordered(i);
        if (assignment.node_ids.empty()) {
            doc.skipped_sections.push_back(assignment.section);
            continue;
        }
        SectionTemplate tmpl = default_template(assignment.section);
        doc.paragraphs.push_back(generate_section(
            assignment, graph, tmpl, store, gateway, config, warnings));
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Output rendering
// ---------------------------------------------------------------------------

inline std::string section_heading(SectionId s) {
    switch (s) {
        case SectionId::Field: return "Field of the Invention";
        case SectionId::Background: return "Background";
        case SectionId::Summary: return "Summary";
        case SectionId::DetailedDescription: return "Detailed Description";
        case SectionId::Effects: return "Effects";
    }
    return "?";
}

inline std::string render_markdown(const DraftDocument& doc) {
    std::string out;
    for (const auto& p : doc.paragraphs) {
        out += "## " + section_heading(p.section) + "\n\n";
        out += p.text;
        if (!p.text.ends_with('\n')) out += '\n';
        out += '\n';
    }
    return out;
}

inline json draft_to_json(const DraftDocument& doc) {
    json paragraphs = json::array();
    for (const auto& p : doc.paragraphs) {
        paragraphs.push_back({{"section", std::string(to_string(p.section))},
                              {"attempts", p.attempts},
                              {"entailment_score", p.entailment_score},
                              {"coverage", p.coverage},
                              {"missing_concepts", p.missing_concepts},
                              {"flagged", p.flagged}});
    }
    json skipped = json::array();
    for (SectionId s : doc.skipped_sections)
        skipped.push_back(std::string(to_string(s)));
    return json{{"paragraphs", paragraphs}, {"skipped_sections", skipped}};
}

}  // namespace flowplan
