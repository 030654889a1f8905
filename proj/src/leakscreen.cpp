#include "facepipe/leakscreen.hpp"

#include <algorithm>

#include "facepipe/embed_io.hpp"
#include "facepipe/errors.hpp"
#include "facepipe/json_io.hpp"
#include "facepipe/util.hpp"

namespace facepipe {

GalleryIndex load_gallery(const std::filesystem::path& path) {
    GalleryIndex gallery;
    gallery.embeddings = read_embedding_matrix(path, /*normalize=*/true);

    const std::filesystem::path sidecar = path.string() + ".labels.json";
    nlohmann::json j = nlohmann::json::parse(read_file_text(sidecar), nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw IoError("gallery labels sidecar is not a JSON array: " + sidecar.string());
    for (const nlohmann::json& item : j) {
        if (!item.is_string())
            throw IoError("gallery labels sidecar holds a non-string entry: " + sidecar.string());
        gallery.labels.push_back(item.get<std::string>());
    }
    if (gallery.labels.size() != gallery.embeddings.rows())
        throw IoError("gallery has " + std::to_string(gallery.embeddings.rows()) +
                      " rows but " + std::to_string(gallery.labels.size()) + " labels");
    return gallery;
}

void write_gallery(const std::filesystem::path& path, const EmbeddingMatrix& embeddings,
                   const std::vector<std::string>& labels) {
    if (labels.size() != embeddings.rows())
        throw ContractError("write_gallery: label count does not match row count");
    write_embedding_matrix(path, embeddings);
    write_file_text(path.string() + ".labels.json", dump_canonical(nlohmann::json(labels)));
}

LeakVerdict screen_identity(const EmbeddingMatrix& matrix, const IdentityRecord& record,
                            const GalleryIndex& gallery, double tau_leak) {
    if (record.embedding_rows.empty())
        throw ContractError("screen_identity: identity " + record.identity_id +
                            " has no embeddings");
    if (gallery.embeddings.rows() == 0)
        throw ContractError("screen_identity: empty gallery");
    if (matrix.dim() != gallery.embeddings.dim())
        throw ContractError("screen_identity: corpus dim " + std::to_string(matrix.dim()) +
                            " != gallery dim " + std::to_string(gallery.embeddings.dim()));

    LeakVerdict verdict;
    verdict.identity_id = record.identity_id;
    std::size_t best_gallery_row = 0;
    for (std::size_t row : record.embedding_rows) {
        std::span<const float> a = matrix.row(row);
        for (std::size_t g = 0; g < gallery.embeddings.rows(); ++g) {
            std::span<const float> b = gallery.embeddings.row(g);
            double dot = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k)
                dot += static_cast<double>(a[k]) * b[k];
            if (dot > verdict.max_similarity) {
                verdict.max_similarity = dot;
                best_gallery_row = g;
            }
        }
    }
    verdict.passed = verdict.max_similarity < tau_leak;
    if (!verdict.passed) verdict.matched_label = gallery.labels[best_gallery_row];
    return verdict;
}

ScreenRun screen_corpus(const EmbeddingMatrix& matrix,
                        const std::vector<IdentityRecord>& records, const GalleryIndex& gallery,
                        double tau_leak, unsigned threads) {
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].identity_id < records[b].identity_id;
    });

    ScreenRun run;
    run.verdicts.resize(records.size());
    parallel_for(records.size(), threads, [&](std::size_t slot) {
        run.verdicts[slot] = screen_identity(matrix, records[order[slot]], gallery, tau_leak);
    });

    run.summary.tau_leak = tau_leak;
    for (const LeakVerdict& v : run.verdicts) {
        if (v.passed) {
            run.summary.n_passed += 1;
        } else {
            run.summary.n_failed += 1;
            run.summary.failed_ids.push_back(v.identity_id);
        }
    }
    return run;
}

nlohmann::json verdict_to_json(const LeakVerdict& v) {
    return nlohmann::json{
        {"identity_id", v.identity_id},
        {"max_similarity", v.max_similarity},
        {"matched_gallery_label",
         v.matched_label ? nlohmann::json(*v.matched_label) : nlohmann::json(nullptr)},
        {"passed", v.passed}};
}

void write_screen_run(const std::filesystem::path& path, const ScreenRun& run) {
    nlohmann::json verdicts = nlohmann::json::array();
    for (const LeakVerdict& v : run.verdicts) verdicts.push_back(verdict_to_json(v));
    nlohmann::json j;
    j["version"] = 1;
    j["summary"] = {{"n_passed", run.summary.n_passed},
                    {"n_failed", run.summary.n_failed},
                    {"tau_leak", run.summary.tau_leak},
                    {"failed", run.summary.failed_ids}};
    j["verdicts"] = verdicts;
    write_file_text(path, dump_canonical(j));
}

} // namespace facepipe
