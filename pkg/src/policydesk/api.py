"""HTTP/JSON binding for every service operation, plus the embedded server.

Authentication is a bearer token from POST /login; every other endpoint
requires it.  Domain errors map to their HTTP status with a machine-readable
code, so clients branch on ``error.code`` rather than prose.
"""

from __future__ import annotations

import base64
import socket
import threading
import time
from dataclasses import asdict

from fastapi import Body, Depends, FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, Response

import uvicorn

from .config import ServiceConfig
from .customers import PEP, Subscription
from .errors import (
    AddressInUse,
    AuthenticationRequired,
    DomainError,
    UnknownEntity,
    ValidationFailed,
)
from .service import Service
from .storage import KIND_FILE
from .templates import ObjectSchema
from .users import OFFLINE_VERIFICATION_QUESTIONS, Profile, Session, UserAccount
from .values import file_token
from .workqueue import QUEUE_COLUMNS, QueuePage


def create_app(service: Service) -> FastAPI:
    app = FastAPI(title="policydesk", openapi_url=None, docs_url=None, redoc_url=None)
    # Auth is a bearer header (no cookies), so cross-origin browser clients
    # are safe to allow; the web UI is served separately from the API.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def current_session(authorization: str = Header(default="")) -> Session:
        scheme, _, token = authorization.partition(" ")
        if scheme.lower() != "bearer" or not token:
            raise AuthenticationRequired("send Authorization: Bearer <token>")
        return service.resolve(token.strip())

    @app.exception_handler(DomainError)
    async def domain_error_handler(_request: Request, exc: DomainError):
        return JSONResponse(status_code=exc.http_status, content={"error": exc.to_payload()})

    @app.exception_handler(ValueError)
    async def value_error_handler(_request: Request, exc: ValueError):
        wrapped = ValidationFailed(str(exc))
        return JSONResponse(status_code=400, content={"error": wrapped.to_payload()})

    # -- sessions ----------------------------------------------------------

    @app.post("/login")
    def login(payload: dict = Body(...)):
        session, workspaces = service.login(
            payload.get("email", ""), payload.get("secret", "")
        )
        account = service.users.get_user(session.user_id)
        body = {
            "token": session.token,
            "user": _user_payload(account),
            "restricted": session.restricted,
            "workspaces": [asdict(w) for w in workspaces],
        }
        if session.restricted:
            body["verification_questions"] = list(OFFLINE_VERIFICATION_QUESTIONS)
        return body

    @app.post("/logout")
    def logout(session: Session = Depends(current_session)):
        service.users.sessions.revoke(session.token)
        return {"ok": True}

    @app.get("/session")
    def whoami(session: Session = Depends(current_session)):
        account = service.users.get_user(session.user_id)
        body = {
            "user": _user_payload(account),
            "restricted": session.restricted,
            "workspaces": [asdict(w) for w in service.users.workspaces_for(session)]
            if not session.restricted
            else [],
        }
        if session.restricted:
            body["verification_questions"] = list(OFFLINE_VERIFICATION_QUESTIONS)
        return body

    # -- users, grants, verification ---------------------------------------

    @app.post("/users", status_code=201)
    def create_user(payload: dict = Body(...), session: Session = Depends(current_session)):
        account = service.users.create_user(
            session,
            email=payload.get("email", ""),
            role=payload.get("role", "Customer"),
            profile=Profile(name=payload.get("name", ""), phone=payload.get("phone", "")),
            secret=payload.get("secret", ""),
        )
        return _user_payload(account)

    @app.post("/grants", status_code=201)
    def create_grant(payload: dict = Body(...), session: Session = Depends(current_session)):
        grant = service.users.grant_product_access(
            session,
            user_id=payload.get("user_id", ""),
            customer_id=payload.get("customer_id", ""),
            product_id=payload.get("product_id", ""),
            privilege=payload.get("privilege", "ReadOnly"),
        )
        return asdict(grant)

    @app.get("/verification-questions")
    def verification_questions(session: Session = Depends(current_session)):
        del session
        return {"questions": list(OFFLINE_VERIFICATION_QUESTIONS)}

    @app.post("/verification")
    def set_verification(payload: dict = Body(...), session: Session = Depends(current_session)):
        service.users.set_offline_verification(session, payload.get("answers", ()))
        return {"ok": True}

    @app.get("/verification/{user_id}")
    def read_verification(user_id: str, session: Session = Depends(current_session)):
        answers = service.users.verify_offline(session, user_id)
        return {
            "user_id": user_id,
            "questions": list(OFFLINE_VERIFICATION_QUESTIONS),
            "answers": list(answers),
        }

    @app.put("/profile")
    def update_profile(payload: dict = Body(...), session: Session = Depends(current_session)):
        account = service.users.update_profile(
            session,
            name=payload.get("name", ""),
            phone=payload.get("phone", ""),
            target_user_id=payload.get("user_id") or None,
        )
        return _user_payload(account)

    # -- templates and products --------------------------------------------

    @app.post("/templates", status_code=201)
    def create_template(payload: dict = Body(...), session: Session = Depends(current_session)):
        if "document" in payload:
            template = service.template_import(session, payload["document"])
        else:
            template = service.template_create(
                session,
                kind=payload.get("kind", "Protocol"),
                name=payload.get("name", ""),
                items=payload.get("items", []),
            )
        return template.to_payload()

    @app.get("/templates")
    def list_templates(session: Session = Depends(current_session)):
        del session
        return {"templates": [t.to_payload() for t in service.engine.list_templates()]}

    @app.get("/templates/{template_id}")
    def get_template(template_id: str, session: Session = Depends(current_session)):
        del session
        return service.engine.get_template(template_id).to_payload()

    @app.get("/templates/{template_id}/export")
    def export_template_doc(template_id: str, session: Session = Depends(current_session)):
        return {"document": service.template_export(session, template_id)}

    @app.post("/templates/{template_id}/items", status_code=201)
    def add_template_item(
        template_id: str,
        payload: dict = Body(...),
        session: Session = Depends(current_session),
    ):
        template = service.template_add_item(
            session, template_id, payload, payload.get("parent_id")
        )
        return template.to_payload()

    @app.patch("/templates/{template_id}/items/{item_id}")
    def patch_template_item(
        template_id: str,
        item_id: str,
        payload: dict = Body(...),
        session: Session = Depends(current_session),
    ):
        template = None
        if "parent_id" in payload:
            template = service.template_set_parent(
                session, template_id, item_id, payload["parent_id"]
            )
        if "enabled" in payload:
            template = service.template_set_enabled(
                session, template_id, item_id, bool(payload["enabled"])
            )
        if template is None:
            raise ValidationFailed("nothing to change: send parent_id and/or enabled")
        return template.to_payload()

    @app.delete("/templates/{template_id}")
    def delete_template(template_id: str, session: Session = Depends(current_session)):
        service.template_delete(session, template_id)
        return {"deleted": template_id}

    @app.post("/products", status_code=201)
    def define_product(payload: dict = Body(...), session: Session = Depends(current_session)):
        product = service.product_define(
            session,
            name=payload.get("name", ""),
            component_defs=payload.get("components", []),
            policy_names=payload.get("policies", []),
            pep_template_id=payload.get("pep_template_id"),
        )
        return _product_payload(service, product)

    @app.get("/products")
    def list_products(session: Session = Depends(current_session)):
        del session
        return {"products": [_product_payload(service, p) for p in service.engine.list_products()]}

    @app.get("/products/{product_id}")
    def get_product(product_id: str, session: Session = Depends(current_session)):
        del session
        return _product_payload(service, service.engine.get_product(product_id))

    @app.post("/policies/{policy_id}/template")
    def assign_policy_template(
        policy_id: str, payload: dict = Body(...), session: Session = Depends(current_session)
    ):
        policy = service.policy_assign_template(session, policy_id, payload.get("template_id", ""))
        return asdict(policy)

    @app.post("/products/{product_id}/pep-template")
    def set_pep_template(
        product_id: str, payload: dict = Body(...), session: Session = Depends(current_session)
    ):
        product = service.product_set_pep_template(
            session, product_id, payload.get("template_id", "")
        )
        return _product_payload(service, product)

    @app.get("/schemas/{schema_id}")
    def get_schema(schema_id: str, session: Session = Depends(current_session)):
        del session
        return _schema_payload(service, service.engine.get_schema(schema_id))

    # -- customers and provisioning ----------------------------------------

    @app.post("/customers", status_code=201)
    def create_customer(payload: dict = Body(...), session: Session = Depends(current_session)):
        customer = service.customers.create_customer(
            session, name=payload.get("name", ""), contact_user_id=payload.get("contact", "")
        )
        return asdict(customer)

    @app.get("/customers")
    def list_customers(session: Session = Depends(current_session)):
        del session
        return {"customers": [asdict(c) for c in service.customers.list_customers()]}

    @app.get("/customers/{customer_id}")
    def get_customer(customer_id: str, session: Session = Depends(current_session)):
        del session
        customer = service.customers.get_customer(customer_id)
        return {
            "customer": asdict(customer),
            "subscriptions": [
                _subscription_payload(s)
                for s in service.customers.list_subscriptions(customer_id)
            ],
            "peps": [_pep_payload(p) for p in service.customers.list_peps(customer_id)],
        }

    @app.post("/customers/{customer_id}/subscriptions", status_code=201)
    def subscribe(
        customer_id: str,
        payload: dict = Body(...),
        session: Session = Depends(current_session),
    ):
        subscription = service.customers.subscribe_product(
            session,
            customer_id,
            payload.get("product_id", ""),
            payload.get("peps", []),
        )
        return _subscription_payload(subscription)

    @app.post("/customers/{customer_id}/peps", status_code=201)
    def add_pep(
        customer_id: str,
        payload: dict = Body(...),
        session: Session = Depends(current_session),
    ):
        pep = service.customers.add_pep(
            session,
            customer_id,
            {"pep_id": payload.get("pep_id", ""), "features": payload.get("features", {})},
            package_id=payload.get("package_id", "NewPackage"),
            product_id=payload.get("product_id", ""),
        )
        return _pep_payload(pep)

    @app.get("/packages/{package_id}")
    def get_package(package_id: str, session: Session = Depends(current_session)):
        del session
        package = service.customers.get_package(package_id)
        policies = []
        for link in service.customers.customer_policies(package.customer_id):
            if link.object_id not in package.member_object_ids:
                continue
            policy = service.engine.get_policy(link.policy_id)
            obj = service.customers.get_object(link.object_id)
            policies.append({
                "customer_policy_id": link.customer_policy_id,
                "policy_id": policy.policy_id,
                "policy_name": policy.name,
                "object": _object_payload(service, obj),
            })
        peps = []
        for pep in service.customers.list_peps(package.customer_id):
            if pep.package_id != package.package_id:
                continue
            entry = _pep_payload(pep)
            if pep.object_id:
                entry["object"] = _object_payload(
                    service, service.customers.get_object(pep.object_id)
                )
            peps.append(entry)
        return {"package": asdict(package), "policies": policies, "peps": peps}

    @app.get("/objects/{object_id}")
    def get_object(object_id: str, session: Session = Depends(current_session)):
        del session
        return _object_payload(service, service.customers.get_object(object_id))

    @app.delete("/entities/{kind}/{entity_id}")
    def delete_entity(kind: str, entity_id: str, session: Session = Depends(current_session)):
        service.customers.delete_entity(session, kind, entity_id)
        return {"deleted": f"{kind}/{entity_id}"}

    # -- change requests ----------------------------------------------------

    @app.post("/requests", status_code=201)
    def submit_request(payload: dict = Body(...), session: Session = Depends(current_session)):
        request = service.queue.submit_change_request(
            session,
            package_id=payload.get("package_id", ""),
            class_of_service=payload.get("class_of_service", "Standard"),
            edits=payload.get("edits", []),
            draft=bool(payload.get("draft", False)),
        )
        return request.to_payload()

    @app.post("/requests/{request_id}/assign")
    def assign_request(
        request_id: int, payload: dict = Body(...), session: Session = Depends(current_session)
    ):
        request = service.queue.assign_request(
            session, request_id, payload.get("assignee", "")
        )
        return request.to_payload()

    @app.post("/requests/{request_id}/transition")
    def transition_request(
        request_id: int, payload: dict = Body(...), session: Session = Depends(current_session)
    ):
        request = service.queue.transition_request(
            session, request_id, payload.get("action", "")
        )
        return request.to_payload()

    @app.post("/requests/{request_id}/suspend")
    def suspend_request(
        request_id: int,
        payload: dict = Body(default={}),
        session: Session = Depends(current_session),
    ):
        if payload.get("resume"):
            request = service.queue.resume_request(session, request_id)
        else:
            request = service.queue.suspend_request(session, request_id)
        return request.to_payload()

    @app.get("/queue")
    def queue_view(
        status: str = "",
        sort: str = "",
        kind: str = "",
        page: int = 1,
        page_size: int = 0,
        session: Session = Depends(current_session),
    ):
        view = service.queue.list_queue(
            session,
            status=status or None,
            sort=sort or None,
            record_kind=kind or None,
            page=page,
            page_size=page_size or None,
        )
        return _queue_payload(view)

    @app.get("/requests/{request_id}")
    def request_detail(request_id: int, session: Session = Depends(current_session)):
        return service.queue.request_detail(session, request_id)

    @app.get("/reports")
    def reports(
        target: str = "self",
        since: str = "",
        until: str = "",
        format: str = "json",
        session: Session = Depends(current_session),
    ):
        report = service.queue.generate_report(session, target, since=since, until=until)
        if format.lower() == "csv":
            return PlainTextResponse(
                service.queue.report_to_csv(report), media_type="text/csv"
            )
        return {
            "generated_at": report.generated_at,
            "since": report.since,
            "until": report.until,
            "sections": [
                {
                    "user_id": section.user_id,
                    "status_counts": section.status_counts,
                    "request_ids": list(section.request_ids),
                    "rows": [row.to_payload() for row in section.rows],
                }
                for section in report.sections
            ],
        }

    # -- files --------------------------------------------------------------

    @app.put("/files", status_code=201)
    async def upload_file(request: Request, session: Session = Depends(current_session)):
        content = await request.body()
        token = file_token(content)
        with service.store.transaction() as txn:
            if not txn.exists(KIND_FILE, token):
                txn.put(
                    KIND_FILE,
                    token,
                    {
                        "token": token,
                        "size": len(content),
                        "content": base64.b64encode(content).decode("ascii"),
                        "uploaded_by": session.user_id,
                    },
                )
        return {"token": token, "size": len(content)}

    @app.get("/files/{token}")
    def download_file(token: str, session: Session = Depends(current_session)):
        del session
        with service.store.transaction() as txn:
            record = txn.get(KIND_FILE, token)
        if record is None:
            raise UnknownEntity(f"no file {token!r}", kind="file", entity_id=token)
        return Response(
            content=base64.b64decode(record.payload["content"]),
            media_type="application/octet-stream",
        )

    return app


# -- payload helpers ---------------------------------------------------------

def _user_payload(account: UserAccount) -> dict:
    return {
        "user_id": account.user_id,
        "email": account.email,
        "role": account.role.value,
        "name": account.profile.name,
        "phone": account.profile.phone,
        "verification_set": account.verification_set,
        "active": account.active,
    }


def _product_payload(service: Service, product) -> dict:
    policies = []
    for policy_id in product.policy_ids:
        policy = service.engine.get_policy(policy_id)
        policies.append({
            "policy_id": policy.policy_id,
            "name": policy.name,
            "template_id": policy.template_id,
        })
    return {
        "product_id": product.product_id,
        "name": product.name,
        "components": [c.to_payload() for c in product.components],
        "policies": policies,
        "pep_template_id": product.pep_template_id,
    }


def _subscription_payload(subscription: Subscription) -> dict:
    return {
        "subscription_id": subscription.subscription_id,
        "customer_id": subscription.customer_id,
        "product_id": subscription.product_id,
        "customer_policy_ids": list(subscription.customer_policy_ids),
        "package_ids": list(subscription.package_ids),
        "pep_ids": list(subscription.pep_ids),
    }


def _pep_payload(pep: PEP) -> dict:
    return {
        "pep_id": pep.pep_id,
        "customer_id": pep.customer_id,
        "subscription_id": pep.subscription_id,
        "product_id": pep.product_id,
        "package_id": pep.package_id,
        "object_id": pep.object_id,
    }


def _object_payload(service: Service, obj) -> dict:
    schema = service.engine.get_schema(obj.schema_id)
    return {
        "object_id": obj.object_id,
        "schema_id": obj.schema_id,
        "customer_id": obj.customer_id,
        "blank": obj.blank,
        "values": {name: value.raw for name, value in obj.values.items()},
        "schema": _schema_payload(service, schema),
    }


def _schema_payload(service: Service, schema: ObjectSchema) -> dict:
    resolved = service.engine.resolve_schema_items(schema)
    payload = schema.to_payload()
    payload["items"] = {
        name: {
            "name": item.name,
            "data_type": item.data_type.value,
            "required": item.required,
            "parent_name": item.parent_name,
            "ancestors_enabled": item.ancestors_enabled,
        }
        for name, item in resolved.items()
    }
    return payload


def _queue_payload(view: QueuePage) -> dict:
    return {
        "columns": [{"key": key, "label": label} for key, label in QUEUE_COLUMNS],
        "rows": [row.to_payload() for row in view.rows],
        "page": view.page,
        "page_size": view.page_size,
        "total_rows": view.total_rows,
        "total_pages": view.total_pages,
    }


# -- embedded server ---------------------------------------------------------

class ApiServer:
    """A running HTTP server plus the service behind it."""

    def __init__(
        self,
        service: Service,
        server: uvicorn.Server,
        thread: threading.Thread,
        host: str,
        port: int,
        owns_service: bool,
    ):
        self.service = service
        self._server = server
        self._thread = thread
        self.host = host
        self.port = port
        self._owns_service = owns_service

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def wait(self) -> None:
        """Block until the server thread exits (Ctrl-C friendly)."""
        try:
            self._thread.join()
        except KeyboardInterrupt:
            self.stop()

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)
        if self._owns_service:
            self.service.close()

    def __enter__(self) -> "ApiServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()


def serve_api(config: ServiceConfig | None = None, service: Service | None = None) -> ApiServer:
    """Start the HTTP service on the configured address.

    Binds the socket up front so an occupied port fails fast with
    AddressInUse; ``listen_port`` 0 picks a free port (handy for tests).
    """
    if config is None:
        config = service.config if service is not None else ServiceConfig()
    owns_service = service is None
    if service is None:
        service = Service.from_config(config)
    if config.bootstrap_admin_email:
        service.bootstrap_admin(config.bootstrap_admin_email, config.bootstrap_admin_secret)
    service.require_loginable()

    app = create_app(service)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    # A restart must not stumble over the previous process's TIME_WAIT
    # socket; an actively bound port still fails with AddressInUse.
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((config.listen_host, config.listen_port))
    except OSError as exc:
        sock.close()
        if owns_service:
            service.close()
        raise AddressInUse(
            f"cannot listen on {config.listen_address}: {exc}"
        ) from exc
    host, port = sock.getsockname()[:2]

    uv_config = uvicorn.Config(app, log_level="warning", access_log=False)
    server = uvicorn.Server(uv_config)
    thread = threading.Thread(
        target=server.run, kwargs={"sockets": [sock]}, daemon=True, name="policydesk-api"
    )
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if not thread.is_alive():
            raise AddressInUse(f"server thread exited before startup on {host}:{port}")
        if time.monotonic() > deadline:
            server.should_exit = True
            raise AddressInUse(f"server did not start within 15s on {host}:{port}")
        time.sleep(0.02)
    return ApiServer(service, server, thread, host, port, owns_service)
