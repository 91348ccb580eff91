#include "mcpscope/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "mcpscope/common/text.hpp"
#include "mcpscope/kernels/kmeans.hpp"

namespace mcpscope::taxonomy {

std::string soc_group(std::string_view occupation_code) {
    auto code = text::trim(occupation_code);
    if (code.size() < 2 || !std::isdigit(static_cast<unsigned char>(code[0])) ||
        !std::isdigit(static_cast<unsigned char>(code[1]))) {
        throw std::invalid_argument(fmt::format("malformed SOC code '{}'", occupation_code));
    }
    return std::string(code.substr(0, 2));
}

void SocCrosswalk::add(const std::string& task_id, const std::string& occupation_code) {
    auto& occ = links_[task_id];
    if (std::find(occ.begin(), occ.end(), occupation_code) == occ.end()) {
        occ.push_back(occupation_code);
    }
}

bool SocCrosswalk::contains(const std::string& task_id) const { return links_.count(task_id) > 0; }

const std::vector<std::string>& SocCrosswalk::occupations(const std::string& task_id) const {
    auto it = links_.find(task_id);
    if (it == links_.end()) throw std::invalid_argument(fmt::format("unknown task id '{}'", task_id));
    return it->second;
}

std::map<std::string, double> SocCrosswalk::distribution(const std::string& task_id) const {
    const auto& occ = occupations(task_id);
    std::map<std::string, double> out;
    const double w = 1.0 / static_cast<double>(occ.size());
    for (const auto& o : occ) out[soc_group(o)] += w;
    return out;
}

OnetData load_onet(const OnetFiles& files) {
    OnetData data;
    Table tasks = read_tsv(files.tasks);
    const auto c_occ = tasks.column("O*NET-SOC Code");
    const auto c_title = tasks.column("Title");
    const auto c_id = tasks.column("Task ID");
    const auto c_text = tasks.column("Task");
    std::map<std::string, std::size_t> seen;
    for (const auto& row : tasks.rows) {
        const auto& id = row[c_id];
        const auto& occ = row[c_occ];
        if (text::trim(row[c_text]).empty()) continue;
        if (files.crosswalk.empty()) data.crosswalk.add(id, occ);
        if (seen.count(id)) continue;
        seen[id] = data.tasks.size();
        OnetTask t;
        t.task_id = id;
        t.text = std::string(text::trim(row[c_text]));
        t.occupation_title = row[c_title];
        t.occupation_code = occ;
        t.soc_code = soc_group(occ);
        data.tasks.push_back(std::move(t));
    }
    if (!files.crosswalk.empty()) {
        Table cw = read_tsv(files.crosswalk);
        const auto x_id = cw.column("Task ID");
        const auto x_occ = cw.column("O*NET-SOC Code");
        for (const auto& row : cw.rows) data.crosswalk.add(row[x_id], row[x_occ]);
        for (const auto& t : data.tasks) {
            if (!data.crosswalk.contains(t.task_id)) data.crosswalk.add(t.task_id, t.occupation_code);
        }
    }
    if (!files.work_context.empty()) {
        Table wc = read_tsv(files.work_context);
        const auto w_occ = wc.column("O*NET-SOC Code");
        const auto w_el = wc.column("Element ID");
        const auto w_scale = wc.column("Scale ID");
        const auto w_val = wc.column("Data Value");
        for (const auto& row : wc.rows) {
            if (row[w_el] != files.impact_element || row[w_scale] != files.impact_scale) continue;
            double v = std::stod(row[w_val]);
            if (v < 1 || v > 5) {
                throw std::invalid_argument(fmt::format("work-context value {} outside 1-5", v));
            }
            data.occupation_impact[row[w_occ]] = (v - 1.0) * 25.0;
        }
    }
    for (auto& t : data.tasks) {
        t.soc_distribution = data.crosswalk.distribution(t.task_id);
        double sum = 0;
        int n = 0;
        for (const auto& occ : data.crosswalk.occupations(t.task_id)) {
            auto it = data.occupation_impact.find(occ);
            if (it != data.occupation_impact.end()) {
                sum += it->second;
                ++n;
            }
        }
        if (n > 0) t.impact_score = sum / n;
    }
    return data;
}

std::map<std::string, double> soc_of_task(const OnetData& data, const std::string& task_id) {
    return data.crosswalk.distribution(task_id);
}

StakesBucket stakes_bucket(double score) {
    if (!(score >= 0 && score <= 100)) {
        throw std::invalid_argument(fmt::format("stakes score {} outside [0, 100]", score));
    }
    if (score < 50) return StakesBucket::low;
    if (score <= 75) return StakesBucket::medium;
    return StakesBucket::high;
}

const L2Node& Hierarchy::l2_node(const std::string& id) const {
    auto it = l2_index_.find(id);
    if (it == l2_index_.end()) throw std::invalid_argument(fmt::format("unknown L2 id '{}'", id));
    return l2[it->second];
}

std::vector<std::size_t> Hierarchy::children(const std::string& l1_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < l2.size(); ++i) {
        if (l2[i].parent == l1_id) out.push_back(i);
    }
    return out;
}

std::size_t Hierarchy::task_index(const std::string& task_id) const {
    auto it = task_index_.find(task_id);
    if (it == task_index_.end()) throw std::invalid_argument(fmt::format("unknown task id '{}'", task_id));
    return it->second;
}

std::size_t Hierarchy::max_children() const {
    std::size_t m = 0;
    for (const auto& n : l1) m = std::max(m, children(n.id).size());
    return m;
}

std::size_t Hierarchy::max_members() const {
    std::size_t m = 0;
    for (const auto& n : l2) m = std::max(m, n.members.size());
    return m;
}

double Hierarchy::mean_assignment_similarity() const {
    if (l2.empty()) return 0;
    double s = 0;
    for (const auto& n : l2) s += n.assignment_similarity;
    return s / static_cast<double>(l2.size());
}

void Hierarchy::index() {
    l2_index_.clear();
    task_index_.clear();
    for (std::size_t i = 0; i < l2.size(); ++i) l2_index_[l2[i].id] = i;
    for (std::size_t i = 0; i < tasks.size(); ++i) task_index_[tasks[i].task_id] = i;
}

std::vector<L1Node> load_l1_categories(const fs::path& asset_root) {
    Json doc = read_json(asset_root / "l1_categories.json");
    std::vector<L1Node> out;
    for (const auto& item : doc) {
        out.push_back({item.at("id").get<std::string>(), item.at("name").get<std::string>()});
    }
    if (out.size() != 12) throw ConfigError("l1_categories.json must list exactly 12 categories");
    return out;
}

std::string embedding_text(const OnetTask& task) {
    return fmt::format("{} [{}]", task.text, task.occupation_title);
}

std::pair<std::string, double> assign_l1(const Vector& centroid,
                                         const std::vector<std::pair<std::string, Vector>>& l1) {
    if (l1.empty()) throw std::invalid_argument("no L1 categories");
    if (centroid.norm() == 0) throw std::invalid_argument("zero centroid vector");
    std::string best;
    double best_sim = -2;
    for (const auto& [id, v] : l1) {
        if (v.size() != centroid.size()) throw std::invalid_argument("L1 embedding dimension mismatch");
        if (v.norm() == 0) throw std::invalid_argument(fmt::format("zero embedding for {}", id));
        double s = cosine(centroid, v);
        if (s > best_sim || (s == best_sim && id < best)) {
            best_sim = s;
            best = id;
        }
    }
    return {best, best_sim};
}

std::vector<std::vector<std::string>> top_terms(const std::vector<std::vector<std::string>>& clusters,
                                                std::size_t n) {
    const double k = static_cast<double>(clusters.size());
    std::map<std::string, int> df;
    std::vector<std::map<std::string, int>> tf(clusters.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (const auto& doc : clusters[c]) {
            for (const auto& w : text::words(doc)) {
                if (w.size() < 3 || HashedTfidfEmbedder::tokens(w).empty()) continue;
                ++tf[c][w];
            }
        }
        for (const auto& [w, _] : tf[c]) ++df[w];
    }
    std::vector<std::vector<std::string>> out(clusters.size());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        std::vector<std::pair<double, std::string>> scored;
        for (const auto& [w, count] : tf[c]) {
            double idf = std::log((k + 1.0) / (df[w] + 0.0)) + 1.0;
            scored.emplace_back(-count * idf, w);
        }
        std::sort(scored.begin(), scored.end());
        for (std::size_t i = 0; i < std::min(n, scored.size()); ++i) out[c].push_back(scored[i].second);
    }
    return out;
}

namespace {

std::optional<std::string> parse_cluster_name(const std::string& reply) {
    auto line = std::string(text::trim(reply));
    if (line.find('\n') != std::string::npos) line = std::string(text::trim(text::split_lines(line)[0]));
    while (!line.empty() && (line.front() == '"' || line.front() == '\'')) line.erase(line.begin());
    while (!line.empty() && (line.back() == '"' || line.back() == '\'' || line.back() == '.')) line.pop_back();
    auto n = text::words(line).size();
    if (n < 6 || n > 13) return std::nullopt;
    return line;
}

}  // namespace

Hierarchy build_hierarchy(const std::vector<OnetTask>& tasks, const std::vector<L1Node>& l1,
                          EmbeddingProvider& embedder, TextAnalysisProvider* namer,
                          const BuildOptions& options, const PromptLibrary* prompts) {
    if (tasks.empty()) throw std::invalid_argument("no tasks to cluster");
    if (options.k <= 0 || static_cast<std::size_t>(options.k) > tasks.size()) {
        throw std::invalid_argument(
            fmt::format("k={} must be between 1 and the number of tasks ({})", options.k, tasks.size()));
    }
    Hierarchy h;
    h.l1 = l1;
    h.tasks = tasks;

    std::vector<std::string> texts;
    texts.reserve(tasks.size());
    for (const auto& t : tasks) texts.push_back(embedding_text(t));
    embedder.fit(texts);
    h.task_vectors = embedder.embed(texts);
    std::vector<std::string> l1_names;
    for (const auto& n : l1) l1_names.push_back(n.name);
    h.l1_vectors = embedder.embed(l1_names);
    const auto dim = static_cast<Eigen::Index>(embedder.dimension());
    for (const auto* group : {&h.task_vectors, &h.l1_vectors}) {
        for (const auto& v : *group) {
            if (v.size() != dim) {
                throw std::invalid_argument(fmt::format("embedder returned dimension {}, expected {}",
                                                        v.size(), dim));
            }
        }
    }

    kernels::Points x(static_cast<Eigen::Index>(tasks.size()), dim);
    for (std::size_t i = 0; i < tasks.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = h.task_vectors[i];
    kernels::KMeansOptions km;
    km.k = options.k;
    km.n_init = options.n_init;
    km.max_iter = options.max_iter;
    km.seed = options.seed;
    km.exec = options.exec;
    auto result = kernels::kmeans(x, km);

    // Stable cluster order: by the input index of each cluster's first member.
    std::vector<int> first(options.k, -1);
    for (std::size_t i = 0; i < result.labels.size(); ++i) {
        if (first[result.labels[i]] < 0) first[result.labels[i]] = static_cast<int>(i);
    }
    std::vector<int> order(options.k);
    std::iota(order.begin(), order.end(), 0);
    order.erase(std::remove_if(order.begin(), order.end(), [&](int c) { return first[c] < 0; }),
                order.end());
    std::sort(order.begin(), order.end(), [&](int a, int b) { return first[a] < first[b]; });

    std::vector<std::pair<std::string, Vector>> l1_pairs;
    for (std::size_t i = 0; i < l1.size(); ++i) l1_pairs.emplace_back(l1[i].id, h.l1_vectors[i]);

    std::vector<std::vector<std::size_t>> member_idx(order.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        L2Node node;
        node.id = fmt::format("L2_{:03d}", rank + 1);
        for (std::size_t i = 0; i < result.labels.size(); ++i) {
            if (result.labels[i] == order[rank]) {
                node.members.push_back(tasks[i].task_id);
                member_idx[rank].push_back(i);
            }
        }
        node.centroid = result.centroids.row(order[rank]).transpose();
        if (options.normalize_centroids && node.centroid.norm() > 0) node.centroid.normalize();
        std::tie(node.parent, node.assignment_similarity) = assign_l1(node.centroid, l1_pairs);
        h.l2.push_back(std::move(node));
    }

    std::vector<std::vector<std::string>> cluster_texts(h.l2.size());
    for (std::size_t c = 0; c < h.l2.size(); ++c) {
        for (auto i : member_idx[c]) cluster_texts[c].push_back(tasks[i].text);
    }
    auto terms = top_terms(cluster_texts, 5);
    std::size_t named_by_provider = 0;
    for (std::size_t c = 0; c < h.l2.size(); ++c) {
        std::optional<std::string> name;
        if (namer != nullptr && prompts != nullptr) {
            // Contrastive context: the nearest other cluster's tasks closest to this centroid.
            std::size_t nearest = c;
            double best = -2;
            for (std::size_t o = 0; o < h.l2.size(); ++o) {
                if (o == c) continue;
                double s = cosine(h.l2[c].centroid, h.l2[o].centroid);
                if (s > best) {
                    best = s;
                    nearest = o;
                }
            }
            std::vector<std::pair<double, std::size_t>> boundary;
            if (nearest != c) {
                for (auto i : member_idx[nearest]) {
                    boundary.emplace_back(-cosine(h.task_vectors[i], h.l2[c].centroid), i);
                }
                std::sort(boundary.begin(), boundary.end());
                if (boundary.size() > 5) boundary.resize(5);
            }
            std::string inside, outside;
            for (const auto& t : cluster_texts[c]) inside += "- " + t + "\n";
            for (const auto& [_, i] : boundary) outside += "- " + tasks[i].text + "\n";
            AnalysisRequest req{"l2_naming",
                                prompts->render("l2_naming", {{"tasks", inside}, {"boundary", outside}}),
                                ""};
            name = ask<std::string>(namer, req, parse_cluster_name, h.l2[c].id);
        }
        if (name) {
            ++named_by_provider;
            h.l2[c].name = *name;
        } else {
            h.l2[c].name = text::join(terms[c], ", ");
        }
    }

    std::vector<std::string> l2_names;
    for (const auto& n : h.l2) l2_names.push_back(n.name);
    h.l2_vectors = embedder.embed(l2_names);

    h.metadata = Json{{"k", options.k},
                      {"n_init", options.n_init},
                      {"max_iter", options.max_iter},
                      {"seed", options.seed},
                      {"embedder_id", embedder.id()},
                      {"embedder_state", embedder.state()},
                      {"dimension", embedder.dimension()},
                      {"centroids_normalized", options.normalize_centroids},
                      {"inertia", result.inertia},
                      {"best_restart", result.best_restart},
                      {"n_tasks", tasks.size()},
                      {"n_l2", h.l2.size()},
                      {"named_by_provider", named_by_provider},
                      {"namer_id", namer ? namer->id() : std::string("top-terms")},
                      {"mean_assignment_similarity", 0.0}};
    h.index();
    h.metadata["mean_assignment_similarity"] = h.mean_assignment_similarity();
    return h;
}

namespace {

Json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const Json& j) {
    auto vals = j.get<std::vector<double>>();
    return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace

void save_hierarchy(const Hierarchy& h, const fs::path& json_path) {
    Json doc;
    doc["metadata"] = h.metadata;
    doc["l1"] = Json::array();
    for (const auto& n : h.l1) doc["l1"].push_back(Json{{"id", n.id}, {"name", n.name}});
    doc["l2"] = Json::array();
    for (const auto& n : h.l2) {
        doc["l2"].push_back(Json{{"id", n.id},
                                 {"name", n.name},
                                 {"parent", n.parent},
                                 {"members", n.members},
                                 {"centroid", vec_json(n.centroid)},
                                 {"assignment_similarity", n.assignment_similarity}});
    }
    doc["tasks"] = Json::array();
    for (const auto& t : h.tasks) {
        Json row{{"task_id", t.task_id},
                 {"text", t.text},
                 {"occupation_title", t.occupation_title},
                 {"occupation_code", t.occupation_code},
                 {"soc_code", t.soc_code},
                 {"soc_distribution", t.soc_distribution}};
        row["impact_score"] = t.impact_score ? Json(*t.impact_score) : Json(nullptr);
        doc["tasks"].push_back(std::move(row));
    }
    auto sidecar = json_path;
    sidecar.replace_extension(".vectors.bin");
    std::vector<Vector> all;
    all.insert(all.end(), h.l1_vectors.begin(), h.l1_vectors.end());
    all.insert(all.end(), h.l2_vectors.begin(), h.l2_vectors.end());
    all.insert(all.end(), h.task_vectors.begin(), h.task_vectors.end());
    write_vectors(sidecar, all);
    doc["vectors"] = Json{{"file", sidecar.filename().string()},
                          {"sha256", sha256_file(sidecar)},
                          {"l1", h.l1_vectors.size()},
                          {"l2", h.l2_vectors.size()},
                          {"tasks", h.task_vectors.size()}};
    write_json(json_path, doc);
}

Hierarchy load_hierarchy(const fs::path& json_path) {
    Json doc = read_json(json_path);
    Hierarchy h;
    h.metadata = doc.at("metadata");
    for (const auto& n : doc.at("l1")) h.l1.push_back({n.at("id"), n.at("name")});
    for (const auto& n : doc.at("l2")) {
        L2Node node;
        node.id = n.at("id");
        node.name = n.at("name");
        node.parent = n.at("parent");
        node.members = n.at("members").get<std::vector<std::string>>();
        node.centroid = json_vec(n.at("centroid"));
        node.assignment_similarity = n.at("assignment_similarity");
        h.l2.push_back(std::move(node));
    }
    for (const auto& t : doc.at("tasks")) {
        OnetTask task;
        task.task_id = t.at("task_id");
        task.text = t.at("text");
        task.occupation_title = t.value("occupation_title", std::string{});
        task.occupation_code = t.value("occupation_code", std::string{});
        task.soc_code = t.value("soc_code", std::string{});
        task.soc_distribution = t.value("soc_distribution", std::map<std::string, double>{});
        if (t.contains("impact_score") && !t["impact_score"].is_null()) task.impact_score = t["impact_score"].get<double>();
        h.tasks.push_back(std::move(task));
    }
    const auto& vinfo = doc.at("vectors");
    auto sidecar = json_path.parent_path() / vinfo.at("file").get<std::string>();
    if (sha256_file(sidecar) != vinfo.at("sha256").get<std::string>()) {
        throw std::runtime_error(fmt::format("{} does not match its recorded digest", sidecar.string()));
    }
    auto all = read_vectors(sidecar);
    std::size_t n1 = vinfo.at("l1"), n2 = vinfo.at("l2"), nt = vinfo.at("tasks");
    if (all.size() != n1 + n2 + nt) throw std::runtime_error("vector sidecar row count mismatch");
    h.l1_vectors.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n1));
    h.l2_vectors.assign(all.begin() + static_cast<std::ptrdiff_t>(n1),
                        all.begin() + static_cast<std::ptrdiff_t>(n1 + n2));
    h.task_vectors.assign(all.begin() + static_cast<std::ptrdiff_t>(n1 + n2), all.end());
    h.index();
    return h;
}

}  // namespace mcpscope::taxonomy
