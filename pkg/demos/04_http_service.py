#!/usr/bin/env python3
"""
The HTTP service, end to end
============================

Boots the API on an ephemeral port, provisions an environment from
demos/seed.json, then walks the whole customer/ops story with nothing
but HTTP: restricted first login, verification, filing a change
request, working the queue, and reading the result back.
"""

import json
import urllib.request
from pathlib import Path

from policydesk import Service, ServiceConfig, load_seed
from policydesk.api import serve_api

HERE = Path(__file__).resolve().parent


def call(base, method, path, token=None, body=None, query=""):
    url = f"{base}{path}{query}"
    data = json.dumps(body).encode() if body is not None else None
    request = urllib.request.Request(url, data=data, method=method)
    request.add_header("Content-Type", "application/json")
    if token:
        request.add_header("Authorization", f"Bearer {token}")
    with urllib.request.urlopen(request) as response:
        return json.loads(response.read())


service = Service(config=ServiceConfig(listen_port=0))
service.bootstrap_admin("root@netops.example", "root-secret-1")
admin, _ = service.login("root@netops.example", "root-secret-1")
report = load_seed(service, admin, HERE / "seed.json")
print(f"seeded {len(report.users)} users, {len(report.templates)} templates,"
      f" {len(report.products)} products, {len(report.customers)} customers")

with serve_api(service=service) as server:
    base = server.url
    print(f"listening on {base}")

    # Carol's first login is restricted until she files her verification
    # answers; the login response carries the questions to ask.
    first = call(base, "POST", "/login",
                 body={"email": "carol@acme.example", "secret": "carol-secret-1"})
    print(f"carol restricted={first['restricted']};"
          f" questions={first['verification_questions']}")
    call(base, "POST", "/verification", token=first["token"],
         body={"answers": ["2019/03", "94105"]})
    carol = call(base, "POST", "/login",
                 body={"email": "carol@acme.example", "secret": "carol-secret-1"})
    workspace = carol["workspaces"][0]
    print(f"carol now sees {workspace['customer_name']} / {workspace['product_name']}"
          f" ({workspace['privilege']})")

    # The package view is the change-request form: policies with their
    # schema columns, plus the enforcement points.
    customer = call(base, "GET", f"/customers/{workspace['customer_id']}",
                    token=carol["token"])
    package_id = customer["subscriptions"][0]["package_ids"][0]
    package = call(base, "GET", f"/packages/{package_id}", token=carol["token"])
    target = package["policies"][0]
    print(f"package {package_id}: {len(package['policies'])} policies,"
          f" {len(package['peps'])} PEPs")

    filed = call(base, "POST", "/requests", token=carol["token"], body={
        "package_id": package_id,
        "class_of_service": "Expedited",
        "edits": [{
            "target_kind": "customer_policy",
            "target_id": target["customer_policy_id"],
            "values": {"Mode": "strict", "Port Count": "8"},
        }],
    })
    print(f"carol filed request #{filed['request_id']} ({filed['status']})")

    # Omar works it from the queue.
    omar = call(base, "POST", "/login",
                body={"email": "omar@netops.example", "secret": "ops-secret-1"})
    queue = call(base, "GET", "/queue", token=omar["token"], query="?sort=-request_id")
    print(f"queue has {queue['total_rows']} rows;"
          f" columns {[c['label'] for c in queue['columns']]}")

    rid = filed["request_id"]
    call(base, "POST", f"/requests/{rid}/assign", token=omar["token"],
         body={"assignee": "omar@netops.example"})
    for action in ("approve", "complete"):
        done = call(base, "POST", f"/requests/{rid}/transition",
                    token=omar["token"], body={"action": action})
    print(f"request #{rid} finished as {done['status']}")

    detail = call(base, "GET", f"/requests/{rid}", token=omar["token"])
    values = detail["policies"][0]["object"]["values"]
    print(f"object now carries {values}")

    root = call(base, "POST", "/login",
                body={"email": "root@netops.example", "secret": "root-secret-1"})
    csv_request = urllib.request.Request(
        f"{base}/reports?target=all&format=csv",
        headers={"Authorization": f"Bearer {root['token']}"},
    )
    with urllib.request.urlopen(csv_request) as response:
        csv = response.read().decode()
    print("assignment report:")
    for line in csv.splitlines()[:4]:
        print(f"  {line}")
