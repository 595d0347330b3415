"""Accounts, roles, per-product privileges, login, off-line verification.

The account id IS the email.  Ops roles hold implicit ReadWrite everywhere;
Customer users carry explicit per-(customer, product) grants.  A customer
account that has not yet stored its off-line verification answers gets a
restricted session that can do nothing but store them.
"""

from __future__ import annotations

import hashlib
import hmac
import re
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Callable

from .errors import (
    AnswerEmpty,
    AuthenticationRequired,
    BadCredentials,
    DuplicateEmail,
    InvalidEmail,
    NameEmpty,
    NotACustomerUser,
    NotCustomerRole,
    NotSubscribed,
    PermissionDenied,
    UnknownEntity,
    VerificationNotSet,
)
from .storage import KIND_GRANT, KIND_USER, MemoryStore

EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")

OFFLINE_VERIFICATION_QUESTIONS = (
    "Year/Month when you entered the company",
    "Your home Zip code",
)

_PBKDF2_ITERATIONS = 50_000


class Role(str, Enum):
    OPS_ADMIN = "OpsAdmin"
    OPS = "Ops"
    CUSTOMER = "Customer"


OPS_ROLES = {Role.OPS_ADMIN, Role.OPS}


class Privilege(str, Enum):
    READ_WRITE = "ReadWrite"
    READ_ONLY = "ReadOnly"
    NO_ACCESS = "NoAccess"


@dataclass(frozen=True)
class Profile:
    name: str = ""
    phone: str = ""


@dataclass(frozen=True)
class UserAccount:
    user_id: str  # the email
    role: Role
    profile: Profile
    verification_set: bool
    active: bool = True

    @property
    def email(self) -> str:
        return self.user_id


@dataclass(frozen=True)
class ProductGrant:
    user_id: str
    customer_id: str
    product_id: str
    privilege: Privilege


@dataclass
class Session:
    """An authenticated caller; restricted until first-login verification."""

    token: str
    user_id: str
    role: Role
    restricted: bool = False
    issued_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    last_seen: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    @property
    def is_ops(self) -> bool:
        return self.role in OPS_ROLES

    @property
    def is_admin(self) -> bool:
        return self.role is Role.OPS_ADMIN


@dataclass(frozen=True)
class Workspace:
    customer_id: str
    customer_name: str
    product_id: str
    product_name: str
    privilege: Privilege


class SessionManager:
    """In-memory bearer-token sessions with an idle-expiry window."""

    def __init__(self, clock: Callable[[], datetime], idle_minutes: int = 30):
        self._clock = clock
        self._idle = timedelta(minutes=idle_minutes)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, user_id: str, role: Role, restricted: bool) -> Session:
        now = self._clock()
        session = Session(
            token=secrets.token_hex(16),
            user_id=user_id,
            role=role,
            restricted=restricted,
            issued_at=now,
            last_seen=now,
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    def resolve(self, token: str) -> Session:
        with self._lock:
            session = self._sessions.get(token or "")
            if session is None:
                raise AuthenticationRequired("no such session")
            now = self._clock()
            if now - session.last_seen > self._idle:
                del self._sessions[token]
                raise AuthenticationRequired("session expired")
            session.last_seen = now
            return session

    def unrestrict(self, user_id: str) -> None:
        with self._lock:
            for session in self._sessions.values():
                if session.user_id == user_id:
                    session.restricted = False

    def revoke(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)


def require_ops(session: Session) -> None:
    if not session.is_ops:
        raise PermissionDenied("ops role required", user_id=session.user_id)


def require_unrestricted(session: Session) -> None:
    if session.restricted:
        raise PermissionDenied(
            "off-line verification must be set before anything else", user_id=session.user_id
        )


class UserMaster:
    """Account operations over the record store."""

    def __init__(
        self,
        store: MemoryStore,
        clock: Callable[[], datetime] | None = None,
        idle_minutes: int = 30,
        pbkdf2_iterations: int = _PBKDF2_ITERATIONS,
    ):
        self.store = store
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.sessions = SessionManager(self.clock, idle_minutes)
        self._iterations = pbkdf2_iterations
        # Provider wired in by the service: (customer_id, product_id) -> bool
        self.subscription_exists: Callable[[str, str], bool] = lambda c, p: False
        # Provider wired in by the service: () -> list of Workspace for ops users
        self.all_workspaces: Callable[[], list[Workspace]] = lambda: []
        self.customer_workspaces: Callable[[str], list[Workspace]] = lambda user_id: []

    # -- accounts ------------------------------------------------------------

    def create_user(self, actor: Session, email: str, role, profile: Profile | None = None, secret: str = "") -> UserAccount:
        require_ops(actor)
        role = Role(role)
        profile = profile or Profile()
        if not EMAIL_RE.match(email or ""):
            raise InvalidEmail(f"not a well-formed email: {email!r}", email=email)
        with self.store.transaction() as txn:
            if txn.exists(KIND_USER, email):
                raise DuplicateEmail(f"account {email!r} exists", email=email)
            payload = {
                "user_id": email,
                "role": role.value,
                "name": profile.name,
                "phone": profile.phone,
                "credential": self._hash_secret(secret),
                "verification": None,
                "verification_set": role is not Role.CUSTOMER,
                "active": True,
            }
            txn.put(KIND_USER, email, payload)
        return self.get_user(email)

    def get_user(self, user_id: str) -> UserAccount:
        with self.store.transaction() as txn:
            record = txn.require(KIND_USER, user_id)
        return _account_from(record.payload)

    def find_user(self, user_id: str) -> UserAccount | None:
        with self.store.transaction() as txn:
            record = txn.get(KIND_USER, user_id)
        return _account_from(record.payload) if record else None

    def deactivate_user(self, actor: Session, user_id: str) -> UserAccount:
        require_ops(actor)
        with self.store.transaction() as txn:
            record = txn.require(KIND_USER, user_id)
            payload = dict(record.payload)
            payload["active"] = False
            txn.put(KIND_USER, user_id, payload)
        return self.get_user(user_id)

    # -- grants --------------------------------------------------------------

    def grant_product_access(
        self, actor: Session, user_id: str, customer_id: str, product_id: str, privilege
    ) -> ProductGrant:
        require_ops(actor)
        privilege = Privilege(privilege)
        with self.store.transaction() as txn:
            record = txn.get(KIND_USER, user_id)
            if record is None:
                raise UnknownEntity(f"no user {user_id!r}", kind=KIND_USER, entity_id=user_id)
            if Role(record.payload["role"]) is not Role.CUSTOMER:
                raise NotACustomerUser(
                    f"{user_id!r} is an ops account; ops hold ReadWrite implicitly",
                    user_id=user_id,
                )
            if not self.subscription_exists(customer_id, product_id):
                raise NotSubscribed(
                    f"customer {customer_id!r} is not subscribed to {product_id!r}",
                    customer_id=customer_id,
                    product_id=product_id,
                )
            grant_id = f"{user_id}|{customer_id}|{product_id}"
            txn.put(
                KIND_GRANT,
                grant_id,
                {
                    "user_id": user_id,
                    "customer_id": customer_id,
                    "product_id": product_id,
                    "privilege": privilege.value,
                },
            )
        return ProductGrant(user_id, customer_id, product_id, privilege)

    def grants_for(self, user_id: str) -> list[ProductGrant]:
        with self.store.transaction() as txn:
            out = []
            for record in txn.list(KIND_GRANT):
                if record.payload["user_id"] == user_id:
                    out.append(
                        ProductGrant(
                            user_id=record.payload["user_id"],
                            customer_id=record.payload["customer_id"],
                            product_id=record.payload["product_id"],
                            privilege=Privilege(record.payload["privilege"]),
                        )
                    )
        return out

    def effective_privilege(self, user_id: str, customer_id: str, product_id: str) -> Privilege:
        user = self.find_user(user_id)
        if user is None:
            return Privilege.NO_ACCESS
        if user.role in OPS_ROLES:
            return Privilege.READ_WRITE
        for grant in self.grants_for(user_id):
            if grant.customer_id == customer_id and grant.product_id == product_id:
                return grant.privilege
        return Privilege.NO_ACCESS

    # -- login and sessions --------------------------------------------------

    def login(self, email: str, secret: str) -> tuple[Session, list[Workspace]]:
        with self.store.transaction() as txn:
            record = txn.get(KIND_USER, email or "")
        if record is None or not record.payload.get("active", True):
            # Burn the same hashing cost as a real check; unknown email and
            # wrong secret must be indistinguishable.
            self._hash_secret(secret, salt=b"\x00" * 16)
            raise BadCredentials("bad email or credential")
        if not self._verify_secret(secret, record.payload["credential"]):
            raise BadCredentials("bad email or credential")
        role = Role(record.payload["role"])
        restricted = role is Role.CUSTOMER and not record.payload["verification_set"]
        session = self.sessions.create(email, role, restricted)
        if restricted:
            return session, []
        return session, self.workspaces_for(session)

    def workspaces_for(self, session: Session) -> list[Workspace]:
        if session.is_ops:
            return self.all_workspaces()
        return self.customer_workspaces(session.user_id)

    def resolve_session(self, token: str) -> Session:
        return self.sessions.resolve(token)

    # -- off-line verification ----------------------------------------------

    def set_offline_verification(self, session: Session, answers) -> None:
        if session.role is not Role.CUSTOMER:
            raise NotCustomerRole("only customer users store off-line verification")
        answers = tuple(str(a).strip() for a in answers)
        if len(answers) != len(OFFLINE_VERIFICATION_QUESTIONS) or any(not a for a in answers):
            raise AnswerEmpty("both verification answers are required")
        with self.store.transaction() as txn:
            record = txn.require(KIND_USER, session.user_id)
            payload = dict(record.payload)
            payload["verification"] = list(answers)
            payload["verification_set"] = True
            txn.put(KIND_USER, session.user_id, payload)
        self.sessions.unrestrict(session.user_id)

    def verify_offline(self, actor: Session, customer_user_id: str) -> tuple[str, str]:
        """Hand the stored answers to an ops user; never to a customer session."""
        if not actor.is_ops:
            raise PermissionDenied(
                "off-line verification answers are visible to ops users only",
                user_id=actor.user_id,
            )
        with self.store.transaction() as txn:
            record = txn.require(KIND_USER, customer_user_id)
        answers = record.payload.get("verification")
        if not answers:
            raise VerificationNotSet(
                f"{customer_user_id!r} has not stored verification answers",
                user_id=customer_user_id,
            )
        return tuple(answers)

    # -- profile -------------------------------------------------------------

    def update_profile(
        self, session: Session, name: str, phone: str, target_user_id: str | None = None
    ) -> UserAccount:
        target = target_user_id or session.user_id
        if session.role is Role.CUSTOMER and target != session.user_id:
            raise PermissionDenied("customer users edit their own profile only")
        if not name:
            raise NameEmpty("profile name cannot be cleared")
        with self.store.transaction() as txn:
            record = txn.require(KIND_USER, target)
            payload = dict(record.payload)
            payload["name"] = name
            payload["phone"] = phone
            txn.put(KIND_USER, target, payload)
        return self.get_user(target)

    # -- credentials ---------------------------------------------------------

    def _hash_secret(self, secret: str, salt: bytes | None = None) -> str:
        salt = salt if salt is not None else secrets.token_bytes(16)
        digest = hashlib.pbkdf2_hmac("sha256", secret.encode(), salt, self._iterations)
        return f"{salt.hex()}${self._iterations}${digest.hex()}"

    def _verify_secret(self, secret: str, stored: str) -> bool:
        try:
            salt_hex, iterations, digest_hex = stored.split("$")
        except ValueError:
            return False
        digest = hashlib.pbkdf2_hmac(
            "sha256", secret.encode(), bytes.fromhex(salt_hex), int(iterations)
        )
        return hmac.compare_digest(digest.hex(), digest_hex)


def _account_from(payload: dict) -> UserAccount:
    return UserAccount(
        user_id=payload["user_id"],
        role=Role(payload["role"]),
        profile=Profile(name=payload.get("name", ""), phone=payload.get("phone", "")),
        verification_set=payload["verification_set"],
        active=payload.get("active", True),
    )
