#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcpscope/embedding.hpp"
#include "mcpscope/kernels/exec.hpp"
#include "mcpscope/model.hpp"
#include "mcpscope/provider.hpp"

namespace mcpscope::taxonomy {

struct OnetTask {
    std::string task_id;
    std::string text;
    std::string occupation_title;
    std::string occupation_code;  // full O*NET-SOC code, e.g. 15-1252.00
    std::string soc_code;         // 2-digit group, e.g. 15
    std::optional<double> impact_score;  // mean over the task's rated occupations
    std::map<std::string, double> soc_distribution;
};

/// task_id -> 2-digit SOC group -> weight (weights sum to 1 per task).
class SocCrosswalk {
public:
    void add(const std::string& task_id, const std::string& occupation_code);
    /// Throws std::invalid_argument naming the id when the task is unknown.
    [[nodiscard]] std::map<std::string, double> distribution(const std::string& task_id) const;
    [[nodiscard]] const std::vector<std::string>& occupations(const std::string& task_id) const;
    [[nodiscard]] bool contains(const std::string& task_id) const;
    [[nodiscard]] std::size_t size() const { return links_.size(); }

private:
    std::map<std::string, std::vector<std::string>> links_;
};

std::string soc_group(std::string_view occupation_code);

struct OnetData {
    std::vector<OnetTask> tasks;  // one row per task id, in file order
    SocCrosswalk crosswalk;
    std::map<std::string, double> occupation_impact;  // O*NET-SOC code -> 0..100
};

struct OnetFiles {
    fs::path tasks;         // Task Statements: O*NET-SOC Code, Title, Task ID, Task
    fs::path work_context;  // optional: O*NET-SOC Code, Element ID, Scale ID, Data Value
    fs::path crosswalk;     // optional: Task ID, O*NET-SOC Code
    std::string impact_element = "4.C.3.a.2.b";
    std::string impact_scale = "CX";
};

/// Reads the tab-separated release files. Work-context ratings on the 1-5 scale are
/// rescaled to 0-100 as (v - 1) * 25. Without a crosswalk file, the task file's own
/// (task, occupation) rows form the crosswalk.
OnetData load_onet(const OnetFiles& files);

/// Weighted SOC distribution of a task. Throws std::invalid_argument for unknown ids.
std::map<std::string, double> soc_of_task(const OnetData& data, const std::string& task_id);

/// low < 50 <= medium <= 75 < high. Throws std::invalid_argument outside [0, 100].
StakesBucket stakes_bucket(double score);

struct L1Node {
    std::string id;
    std::string name;
};

struct L2Node {
    std::string id;
    std::string name;
    std::string parent;
    std::vector<std::string> members;  // task ids
    Vector centroid;
    double assignment_similarity = 0;
};

struct Hierarchy {
    std::vector<L1Node> l1;
    std::vector<L2Node> l2;
    std::vector<OnetTask> tasks;
    std::vector<Vector> l1_vectors;    // embeddings of L1 names
    std::vector<Vector> l2_vectors;    // embeddings of L2 names
    std::vector<Vector> task_vectors;  // embeddings of "task [occupation]"
    Json metadata;

    [[nodiscard]] const L2Node& l2_node(const std::string& id) const;
    [[nodiscard]] std::vector<std::size_t> children(const std::string& l1_id) const;
    [[nodiscard]] std::size_t task_index(const std::string& task_id) const;
    [[nodiscard]] std::size_t max_children() const;
    [[nodiscard]] std::size_t max_members() const;
    [[nodiscard]] double mean_assignment_similarity() const;

    void index();

private:
    std::map<std::string, std::size_t> l2_index_;
    std::map<std::string, std::size_t> task_index_;
};

/// The twelve fixed top-level categories (shipped asset).
std::vector<L1Node> load_l1_categories(const fs::path& asset_root = asset_dir());

/// "task text [occupation title]".
std::string embedding_text(const OnetTask& task);

/// argmax cosine; ties to the lexicographically smallest id. Throws on a zero vector or a
/// dimension mismatch.
std::pair<std::string, double> assign_l1(const Vector& centroid,
                                         const std::vector<std::pair<std::string, Vector>>& l1);

struct BuildOptions {
    int k = 400;
    int n_init = 10;
    int max_iter = 300;
    std::uint64_t seed = 42;
    bool normalize_centroids = true;
    kernels::Exec exec = kernels::Exec::parallel;
};

/// Embeds tasks, clusters them with k-means, assigns each cluster to its closest L1 and
/// names it (namer, or top-5 TF-IDF terms when the namer is null or fails).
Hierarchy build_hierarchy(const std::vector<OnetTask>& tasks, const std::vector<L1Node>& l1,
                          EmbeddingProvider& embedder, TextAnalysisProvider* namer,
                          const BuildOptions& options, const PromptLibrary* prompts = nullptr);

/// Top-n terms by in-cluster frequency times inverse cluster frequency.
std::vector<std::vector<std::string>> top_terms(const std::vector<std::vector<std::string>>& clusters,
                                                std::size_t n);

/// hierarchy.json plus a vector sidecar next to it ("<stem>.vectors.bin").
void save_hierarchy(const Hierarchy& h, const fs::path& json_path);
Hierarchy load_hierarchy(const fs::path& json_path);

}  // namespace mcpscope::taxonomy
