#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "cdr/embedding.hpp"
#include "cdr/llm.hpp"
#include "httplib.h"

using namespace cdr;
using nlohmann::json;

namespace {

/// Local stand-in for an embedding / completion backend.
class StubBackend {
public:
    StubBackend() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubBackend() {
        server_.stop();
        thread_.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
    httplib::Server& server() { return server_; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

RetryPolicy fast(int attempts) {
    RetryPolicy p;
    p.max_attempts = attempts;
    p.backoff = std::chrono::milliseconds(1);
    p.connect_timeout = std::chrono::milliseconds(500);
    p.read_timeout = std::chrono::milliseconds(300);
    return p;
}

}  // namespace

TEST(Endpoint, Parse) {
    const auto e = Endpoint::parse("https://api.example.com:8443/v1/embeddings");
    EXPECT_EQ(e.origin, "https://api.example.com:8443");
    EXPECT_EQ(e.path, "/v1/embeddings");
    EXPECT_EQ(Endpoint::parse("http://h").path, "/");
    EXPECT_THROW(Endpoint::parse("ftp://h/x"), std::invalid_argument);
    EXPECT_THROW(Endpoint::parse("no-scheme"), std::invalid_argument);
    EXPECT_THROW(Endpoint::parse("http:///x"), std::invalid_argument);
}

TEST(RemoteEmbedding, ParsesIndexedResponse) {
    StubBackend stub;
    std::string auth;
    stub.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        const auto body = json::parse(req.body);
        EXPECT_EQ(body["model"], "m");
        json data = json::array();
        // Out of order on purpose; the index decides placement.
        for (int i = int(body["input"].size()) - 1; i >= 0; --i)
            data.push_back({{"index", i}, {"embedding", {double(i), 1.0}}});
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    RemoteEmbeddingProvider p({stub.url("/v1/embeddings"), "m", "k", fast(1)});
    const std::vector<std::string> texts{"a", "b", "c"};
    const auto out = p.embed_batch(texts);
    ASSERT_EQ(out.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out[i].values, (std::vector<double>{double(i), 1.0}));
    EXPECT_EQ(auth, "Bearer k");
}

TEST(RemoteEmbedding, MissingEntriesAreContractViolation) {
    StubBackend stub;
    stub.server().Post("/e", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"data":[{"index":0,"embedding":[1,2]}]})", "application/json");
    });
    RemoteEmbeddingProvider p({stub.url("/e"), "m", "", fast(1)});
    const std::vector<std::string> texts{"a", "b"};
    try {
        p.embed_batch(texts);
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_FALSE(e.retryable());
    }
}

TEST(RemoteLlm, SendsMessagesAndReadsContent) {
    StubBackend stub;
    stub.server().Post("/chat", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        EXPECT_EQ(body["temperature"], 0.0);
        EXPECT_EQ(body["messages"][0]["role"], "system");
        EXPECT_EQ(body["messages"][1]["content"], "hello");
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"gcs: 15"}}]})", "application/json");
    });
    RemoteLlmProvider p({stub.url("/chat"), "m", "", fast(1)});
    EXPECT_EQ(p.complete({"sys", "hello", 0.0}), "gcs: 15");
}

TEST(RemoteLlm, RetriesServerErrorsThenSucceeds) {
    StubBackend stub;
    std::atomic<int> hits{0};
    stub.server().Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        if (++hits < 3) {
            res.status = 500;
            return;
        }
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
    });
    RemoteLlmProvider p({stub.url("/chat"), "m", "", fast(3)});
    EXPECT_EQ(p.complete({"", "x", 0}), "ok");
    EXPECT_EQ(hits, 3);
}

TEST(RemoteLlm, PersistentServerErrorIsRetryable) {
    StubBackend stub;
    std::atomic<int> hits{0};
    stub.server().Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    RemoteLlmProvider p({stub.url("/chat"), "m", "", fast(2)});
    try {
        p.complete({"", "x", 0});
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_TRUE(e.retryable());
    }
    EXPECT_EQ(hits, 2);
}

TEST(RemoteLlm, ClientErrorIsNotRetried) {
    StubBackend stub;
    std::atomic<int> hits{0};
    stub.server().Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
    });
    RemoteLlmProvider p({stub.url("/chat"), "m", "", fast(3)});
    try {
        p.complete({"", "x", 0});
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_FALSE(e.retryable());
    }
    EXPECT_EQ(hits, 1);
}

TEST(RemoteLlm, TimeoutIsRetryable) {
    StubBackend stub;
    stub.server().Post("/slow", [](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(800));
        res.set_content(R"({"choices":[{"message":{"content":"late"}}]})", "application/json");
    });
    RemoteLlmProvider p({stub.url("/slow"), "m", "", fast(1)});
    try {
        p.complete({"", "x", 0});
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_TRUE(e.retryable());
    }
}

TEST(RemoteLlm, MalformedBodyIsContractViolation) {
    StubBackend stub;
    stub.server().Post("/chat", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices":[]})", "application/json");
    });
    RemoteLlmProvider p({stub.url("/chat"), "m", "", fast(1)});
    EXPECT_THROW(p.complete({"", "x", 0}), ProviderError);
}

TEST(RemoteLlm, RefusedConnectionIsRetryable) {
    int port;
    {
        httplib::Server s;
        port = s.bind_to_any_port("127.0.0.1");
    }
    RemoteLlmProvider p({"http://127.0.0.1:" + std::to_string(port) + "/x", "m", "", fast(2)});
    try {
        p.complete({"", "x", 0});
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_TRUE(e.retryable());
    }
}
