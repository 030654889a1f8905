#include "facepipe/clients.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>
#include <opencv2/imgproc.hpp>

#include "facepipe/errors.hpp"
#include "facepipe/image.hpp"
#include "facepipe/util.hpp"

// httplib pulls in a lot; keep it confined to this translation unit.
#include <httplib.h>

namespace facepipe {

namespace {

using nlohmann::json;

std::string bearer_token(const std::string& env_var) {
    if (env_var.empty()) return {};
    const char* value = std::getenv(env_var.c_str());
    return value ? std::string(value) : std::string();
}

// POSTs a JSON body and returns the parsed JSON response. Connection-level
// failures and 5xx become TransportError (retryable); anything else that is
// not a 200 with valid JSON is a protocol violation.
json post_json(const std::string& endpoint, const std::string& path, const json& body,
               const std::string& api_key_env) {
    if (endpoint.empty()) throw ContractError("HTTP client: endpoint not configured");
    httplib::Client client(endpoint);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    const std::string token = bearer_token(api_key_env);
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    httplib::Result res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("HTTP request to " + endpoint + path + " failed: " +
                                   httplib::to_string(res.error()));
    if (res->status >= 500)
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + endpoint + path);
    if (res->status != 200)
        throw ContractError("HTTP " + std::to_string(res->status) + " from " + endpoint + path +
                            ": " + res->body.substr(0, 200));
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded())
        throw ContractError("non-JSON response from " + endpoint + path);
    return parsed;
}

std::string require_string(const json& j, const char* key, const std::string& context) {
    if (!j.contains(key) || !j[key].is_string())
        throw ContractError(context + ": response missing string field '" + key + "'");
    return j[key].get<std::string>();
}

} // namespace

// --- scripted -------------------------------------------------------------

ScriptedLlmClient::ScriptedLlmClient(std::vector<std::optional<std::string>> script)
    : script_(std::move(script)) {
    if (script_.empty()) throw ContractError("scripted LLM client needs at least one entry");
}

std::string ScriptedLlmClient::complete(const std::string&, std::span<const std::uint8_t>) {
    const std::size_t idx = std::min(calls_, script_.size() - 1);
    ++calls_;
    if (!script_[idx]) throw TransportError("scripted transport failure");
    return *script_[idx];
}

// --- replay ----------------------------------------------------------------

ReplayLlmClient::ReplayLlmClient(const std::filesystem::path& transcript_jsonl) {
    std::ifstream in(transcript_jsonl);
    if (!in) throw IoError("cannot open transcript: " + transcript_jsonl.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("image_digest") || !j.contains("response"))
            throw IoError("malformed transcript line in " + transcript_jsonl.string());
        by_digest_[j["image_digest"].get<std::string>()] = j["response"].get<std::string>();
    }
}

std::string ReplayLlmClient::complete(const std::string&,
                                      std::span<const std::uint8_t> image_png) {
    const std::string digest = to_hex(fnv1a64(image_png.data(), image_png.size()));
    auto it = by_digest_.find(digest);
    if (it == by_digest_.end())
        throw TransportError("no recorded response for image digest " + digest);
    return it->second;
}

// --- mocks ------------------------------------------------------------------

std::vector<std::uint8_t> MockGeneratorClient::generate(const std::string& prompt) {
    const std::uint64_t h = fnv1a64(prompt);
    Image img = solid_color_image(size_, size_,
                                  static_cast<std::uint8_t>(h & 0xFF),
                                  static_cast<std::uint8_t>((h >> 8) & 0xFF),
                                  static_cast<std::uint8_t>((h >> 16) & 0xFF));
    // Brighter center patch so a detector crop differs from the border.
    const int m = size_ / 4;
    cv::rectangle(img, cv::Rect(m, m, size_ - 2 * m, size_ - 2 * m),
                  cv::Scalar((h >> 24) & 0xFF, (h >> 32) & 0xFF, (h >> 40) & 0xFF), cv::FILLED);
    return encode_png(img);
}

std::vector<std::vector<std::uint8_t>> MockExpanderClient::expand(
    std::span<const std::uint8_t> image, int count) {
    std::vector<std::vector<std::uint8_t>> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.emplace_back(image.begin(), image.end());
    return out;
}

std::vector<FaceBox> MockDetectorClient::detect(std::span<const std::uint8_t> image) {
    if (mode_ == "reject") return {};
    Image img = decode_image(image);
    FaceBox box;
    box.x = img.cols / 10;
    box.y = img.rows / 10;
    box.width = img.cols - 2 * box.x;
    box.height = img.rows - 2 * box.y;
    box.confidence = 0.9;
    return {box};
}

// --- HTTP -------------------------------------------------------------------

std::string HttpLlmClient::complete(const std::string& prompt,
                                    std::span<const std::uint8_t> image_png) {
    json body{{"model", settings_.model},
              {"prompt", prompt},
              {"image_png_base64", base64_encode(image_png)}};
    json res = post_json(settings_.endpoint, settings_.path, body, settings_.api_key_env);
    return require_string(res, "text", "LLM");
}

std::vector<std::uint8_t> HttpGeneratorClient::generate(const std::string& prompt) {
    json res = post_json(settings_.endpoint, settings_.path, json{{"prompt", prompt}},
                         settings_.api_key_env);
    return base64_decode(require_string(res, "image_base64", "generator"));
}

std::vector<std::vector<std::uint8_t>> HttpExpanderClient::expand(
    std::span<const std::uint8_t> image, int count) {
    json body{{"image_base64", base64_encode(image)}, {"count", count}};
    json res = post_json(settings_.endpoint, settings_.path, body, settings_.api_key_env);
    if (!res.contains("images_base64") || !res["images_base64"].is_array())
        throw ContractError("expander: response missing 'images_base64' array");
    std::vector<std::vector<std::uint8_t>> out;
    for (const json& item : res["images_base64"]) {
        if (!item.is_string()) throw ContractError("expander: non-string image entry");
        out.push_back(base64_decode(item.get<std::string>()));
    }
    return out;
}

std::vector<FaceBox> HttpDetectorClient::detect(std::span<const std::uint8_t> image) {
    json body{{"image_base64", base64_encode(image)}};
    json res = post_json(settings_.endpoint, settings_.path, body, settings_.api_key_env);
    if (!res.contains("faces") || !res["faces"].is_array())
        throw ContractError("detector: response missing 'faces' array");
    std::vector<FaceBox> out;
    for (const json& f : res["faces"]) {
        FaceBox box;
        box.x = f.value("x", 0);
        box.y = f.value("y", 0);
        box.width = f.value("width", 0);
        box.height = f.value("height", 0);
        box.confidence = f.value("confidence", 0.0);
        out.push_back(box);
    }
    return out;
}

// --- gateway ------------------------------------------------------------------

LlmGateway::LlmGateway(std::unique_ptr<LlmClient> client, double rate_per_sec, int burst)
    : client_(std::move(client)),
      rate_(rate_per_sec),
      capacity_(std::max(1, burst)),
      tokens_(capacity_),
      last_refill_(std::chrono::steady_clock::now()) {
    if (!client_) throw ContractError("LlmGateway needs a client");
}

std::string LlmGateway::complete(const std::string& prompt,
                                 std::span<const std::uint8_t> image_png) {
    // The lock is held through the request itself: at most one in flight.
    std::lock_guard<std::mutex> lock(mutex_);
    if (rate_ > 0.0) {
        auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(capacity_,
                           tokens_ + rate_ * std::chrono::duration<double>(now - last_refill_).count());
        last_refill_ = now;
        if (tokens_ < 1.0) {
            const double wait_s = (1.0 - tokens_) / rate_;
            std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
            auto after = std::chrono::steady_clock::now();
            tokens_ = std::min(capacity_,
                               tokens_ + rate_ * std::chrono::duration<double>(after - last_refill_).count());
            last_refill_ = after;
        }
        tokens_ -= 1.0;
    }
    return client_->complete(prompt, image_png);
}

std::unique_ptr<LlmGateway> make_llm_gateway(const LlmSettings& settings) {
    std::unique_ptr<LlmClient> client;
    if (settings.kind == "none") {
        return nullptr;
    } else if (settings.kind == "mock") {
        std::vector<std::optional<std::string>> script;
        for (const std::string& s : settings.mock_responses) script.emplace_back(s);
        if (script.empty()) script.emplace_back(std::string{});
        client = std::make_unique<ScriptedLlmClient>(std::move(script));
    } else if (settings.kind == "replay") {
        client = std::make_unique<ReplayLlmClient>(settings.replay_file);
    } else if (settings.kind == "http") {
        client = std::make_unique<HttpLlmClient>(settings);
    } else {
        throw ContractError("unknown LLM client kind: " + settings.kind);
    }
    return std::make_unique<LlmGateway>(std::move(client), settings.rate_per_sec, settings.burst);
}

std::unique_ptr<GeneratorClient> make_generator_client(const AdapterSettings& settings) {
    if (settings.kind == "mock") return std::make_unique<MockGeneratorClient>();
    if (settings.kind == "http") return std::make_unique<HttpGeneratorClient>(settings);
    throw ContractError("unknown generator client kind: " + settings.kind);
}

std::unique_ptr<ExpanderClient> make_expander_client(const AdapterSettings& settings) {
    if (settings.kind == "mock") return std::make_unique<MockExpanderClient>();
    if (settings.kind == "http") return std::make_unique<HttpExpanderClient>(settings);
    throw ContractError("unknown expander client kind: " + settings.kind);
}

std::unique_ptr<DetectorClient> make_detector_client(const AdapterSettings& settings) {
    if (settings.kind == "mock") return std::make_unique<MockDetectorClient>(settings.mock_mode);
    if (settings.kind == "http") return std::make_unique<HttpDetectorClient>(settings);
    throw ContractError("unknown detector client kind: " + settings.kind);
}

} // namespace facepipe
