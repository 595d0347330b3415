"""Service assembly: bootstrap, config-driven storage, and the HTTP server."""

import json
import socket
import urllib.request

import pytest

from policydesk import Role, Service, ServiceConfig
from policydesk.api import serve_api
from policydesk.errors import AddressInUse, ConfigInvalid

from conftest import ADMIN_EMAIL, ADMIN_SECRET


def test_bootstrap_admin_is_idempotent(service):
    account = service.bootstrap_admin(ADMIN_EMAIL, "a-different-secret")
    assert account.role is Role.OPS_ADMIN
    # the original secret still works; bootstrap never overwrites
    session, _ = service.login(ADMIN_EMAIL, ADMIN_SECRET)
    assert session.is_admin


def test_unloginable_deployment_is_refused():
    service = Service(config=ServiceConfig())  # no accounts, no bootstrap creds
    with pytest.raises(ConfigInvalid):
        service.require_loginable()
    service.bootstrap_admin(ADMIN_EMAIL, ADMIN_SECRET)
    service.require_loginable()  # fine now


def test_from_config_opens_sqlite_storage(tmp_path):
    config = ServiceConfig(storage_path=str(tmp_path / "records.db"))
    service = Service.from_config(config)
    service.bootstrap_admin(ADMIN_EMAIL, ADMIN_SECRET)
    service.close()

    reopened = Service.from_config(config)
    assert reopened.has_ops_account()
    session, _ = reopened.login(ADMIN_EMAIL, ADMIN_SECRET)
    assert session.is_admin
    reopened.close()


def http(method, url, token=None, body=None):
    request = urllib.request.Request(url, method=method)
    if token:
        request.add_header("Authorization", f"Bearer {token}")
    data = None
    if body is not None:
        data = json.dumps(body).encode()
        request.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(request, data) as response:
        return json.loads(response.read())


def test_serve_api_over_a_real_socket():
    config = ServiceConfig(
        listen_port=0,  # pick an ephemeral port
        bootstrap_admin_email=ADMIN_EMAIL,
        bootstrap_admin_secret=ADMIN_SECRET,
    )
    with serve_api(config) as server:
        assert server.port != 0
        login = http("POST", f"{server.url}/login",
                     body={"email": ADMIN_EMAIL, "secret": ADMIN_SECRET})
        queue = http("GET", f"{server.url}/queue", token=login["token"])
        assert queue["rows"] == []
        assert [c["key"] for c in queue["columns"]][0] == "request_id"


def test_occupied_port_is_a_named_error():
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        config = ServiceConfig(
            listen_port=port,
            bootstrap_admin_email=ADMIN_EMAIL,
            bootstrap_admin_secret=ADMIN_SECRET,
        )
        with pytest.raises(AddressInUse):
            serve_api(config)
    finally:
        blocker.close()
