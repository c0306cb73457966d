#include <gtest/gtest.h>

#include <thread>

#include "eip/client.hpp"
#include "eip/errors.hpp"
#include "eip/plcsim.hpp"
#include "eip/tags.hpp"
#include "sim_support.hpp"

using namespace eip;
using namespace std::chrono_literals;
using client::Phase;
using client::Session;

namespace {

const char* kTags = R"(
TEST REAL[1] = 0.002815246582031
counts DINT[10] = 1,2,3
big REAL[300]
)";

struct ClientTest : ::testing::Test {
    std::shared_ptr<plcsim::Simulator> sim = std::make_shared<plcsim::Simulator>(simtest::store_from(kTags));
    plcsim::Server server{sim};

    void SetUp() override { server.start(); }

    client::PlcEndpoint endpoint() const {
        client::PlcEndpoint ep;
        ep.port = server.port();
        ep.request_timeout = 1000ms;
        ep.reconnect_period = 200ms;
        return ep;
    }
};

cip::Epath path(const char* tag) { return tags::to_epath(tags::parse_tag(tag)); }

}  // namespace

TEST(Endpoint, ParseHostPort) {
    auto ep = client::parse_host_port("10.0.0.5");
    EXPECT_EQ(ep.host, "10.0.0.5");
    EXPECT_EQ(ep.port, 44818);
    ep = client::parse_host_port("plc:1234");
    EXPECT_EQ(ep.host, "plc");
    EXPECT_EQ(ep.port, 1234);
    EXPECT_THROW(client::parse_host_port("plc:"), UsageError);
    EXPECT_THROW(client::parse_host_port("plc:99999"), UsageError);
}

TEST(Endpoint, Validate) {
    client::PlcEndpoint ep;
    EXPECT_NO_THROW(ep.validate());
    ep.buffer_limit = 512;
    EXPECT_THROW(ep.validate(), UsageError);
    ep.buffer_limit = 511;
    ep.slot = 17;
    EXPECT_THROW(ep.validate(), UsageError);
}

TEST_F(ClientTest, ConnectReadWrite) {
    Session s(endpoint());
    EXPECT_EQ(s.phase(), Phase::Disconnected);
    s.connect();
    EXPECT_EQ(s.phase(), Phase::Registered);
    EXPECT_NE(s.session_handle(), 0u);
    EXPECT_EQ(client::read_product_name(s), "1756-ENET/A ");
    EXPECT_NEAR(client::read_tag(s, path("TEST")).as_real(0), 0.002815, 1e-6);
    client::write_tag(s, path("counts[7]"), cip::CipValue::dints({77}));
    EXPECT_EQ(client::read_tag(s, path("counts[6]"), 2), cip::CipValue::dints({0, 77}));
    EXPECT_EQ(s.round_trips(), 4u);
    EXPECT_EQ(s.context_mismatches(), 0u);
    s.disconnect();
    EXPECT_EQ(s.phase(), Phase::Disconnected);
}

TEST_F(ClientTest, CipErrorKeepsSession) {
    Session s(endpoint());
    s.connect();
    try {
        client::read_tag(s, path("nosuch"));
        FAIL();
    } catch (const CipError& e) {
        EXPECT_EQ(e.general_status(), 0x05);
    }
    EXPECT_TRUE(s.usable());
    EXPECT_NO_THROW(client::read_tag(s, path("TEST")));
}

TEST_F(ClientTest, OversizeRequestRejectedBeforeSending) {
    Session s(endpoint());
    s.connect();
    const auto before = sim->round_trips();
    std::vector<float> many(200, 1.0f);
    EXPECT_THROW(client::write_tag(s, path("big"), cip::CipValue::reals(many)), client::LimitError);
    EXPECT_EQ(sim->round_trips(), before);
    EXPECT_TRUE(s.usable());
    EXPECT_EQ(s.request_budget(), 485u);
}

TEST_F(ClientTest, RefusedSession) {
    sim->set_faults(plcsim::parse_faults("refuse-sessions"));
    Session s(endpoint());
    EXPECT_THROW(s.connect(), SessionError);
    EXPECT_EQ(s.phase(), Phase::Disconnected);
}

TEST_F(ClientTest, UnreachableTarget) {
    auto ep = endpoint();
    server.stop();
    Session s(ep);
    EXPECT_THROW(s.connect(), ConnectionError);
}

TEST_F(ClientTest, TimeoutDisconnects) {
    auto ep = endpoint();
    ep.request_timeout = 50ms;
    Session s(ep);
    s.connect();
    sim->set_faults(plcsim::parse_faults("latency-ms=300"));
    EXPECT_THROW(client::read_tag(s, path("TEST")), TimeoutError);
    EXPECT_EQ(s.phase(), Phase::Disconnected);
}

TEST_F(ClientTest, DroppedConnectionAndReconnect) {
    sim->set_faults(plcsim::parse_faults("drop-after=2"));
    Session s(endpoint());
    s.connect();
    const auto first_handle = s.session_handle();
    client::read_tag(s, path("TEST"));
    client::read_tag(s, path("TEST"));
    EXPECT_THROW(client::read_tag(s, path("TEST")), ConnectionError);
    EXPECT_EQ(s.phase(), Phase::Disconnected);

    const auto t0 = client::Clock::now();
    EXPECT_TRUE(s.ensure_connected(t0));
    EXPECT_NE(s.session_handle(), first_handle);
    EXPECT_NO_THROW(client::read_tag(s, path("TEST")));
}

TEST_F(ClientTest, ReconnectAttemptsAreRateLimited) {
    auto ep = endpoint();
    server.stop();
    Session s(ep);
    const auto t0 = client::Clock::now();
    EXPECT_FALSE(s.ensure_connected(t0));
    EXPECT_FALSE(s.ensure_connected(t0 + 50ms));
    EXPECT_EQ(s.reconnect_attempts(), 1u);
    EXPECT_FALSE(s.ensure_connected(t0 + 250ms));
    EXPECT_EQ(s.reconnect_attempts(), 2u);
    server.start();
    EXPECT_TRUE(s.ensure_connected(t0 + 500ms));
    EXPECT_EQ(s.reconnect_attempts(), 3u);
}

TEST_F(ClientTest, ConnectedMessagingSequence) {
    auto ep = endpoint();
    ep.connected_messaging = true;
    Session s(ep);
    s.connect();
    EXPECT_EQ(s.phase(), Phase::Connected);
    ASSERT_TRUE(s.grant());
    EXPECT_EQ(sim->open_connections(), 1u);
    EXPECT_EQ(s.request_budget(), 500u);
    const auto seq = s.next_sequence();
    for (int i = 0; i < 5; ++i) client::read_tag(s, path("counts[0]"), 3);
    EXPECT_EQ(s.next_sequence(), static_cast<std::uint16_t>(seq + 5));
    const auto log = sim->service_log();
    ASSERT_FALSE(log.empty());
    EXPECT_TRUE(log.back().connected);
    s.close_connection();
    EXPECT_EQ(s.phase(), Phase::Registered);
    EXPECT_EQ(sim->open_connections(), 0u);
}

TEST_F(ClientTest, ConnectionRefusedByTarget) {
    sim->set_faults(plcsim::parse_faults("refuse-connections"));
    auto ep = endpoint();
    ep.connected_messaging = true;
    Session s(ep);
    EXPECT_THROW(s.connect(), CipError);
    EXPECT_EQ(s.phase(), Phase::Disconnected);
}

TEST_F(ClientTest, IdleConnectionClosedByTarget) {
    sim->set_faults(plcsim::parse_faults("close-idle-ms=50"));
    auto ep = endpoint();
    ep.connected_messaging = true;
    Session s(ep);
    s.connect();
    client::read_tag(s, path("TEST"));
    std::this_thread::sleep_for(120ms);
    EXPECT_THROW(client::read_tag(s, path("TEST")), Error);
    EXPECT_FALSE(s.usable());
    EXPECT_TRUE(s.ensure_connected(client::Clock::now() + 1s));
    EXPECT_EQ(s.phase(), Phase::Connected);
    EXPECT_NO_THROW(client::read_tag(s, path("TEST")));
}

TEST_F(ClientTest, WrongSlotIsRoutingError) {
    auto ep = endpoint();
    ep.slot = 4;
    Session s(ep);
    s.connect();
    try {
        client::read_tag(s, path("TEST"));
        FAIL();
    } catch (const CipError& e) {
        EXPECT_EQ(e.general_status(), 0x01);
    }
}
