"""Accounts, sessions, grants, and the off-line verification gate."""

import pytest

from policydesk import Privilege, Profile, Role
from policydesk.errors import (
    AnswerEmpty,
    AuthenticationRequired,
    BadCredentials,
    DuplicateEmail,
    InvalidEmail,
    NotACustomerUser,
    NotSubscribed,
    PermissionDenied,
)
from policydesk.users import OFFLINE_VERIFICATION_QUESTIONS

from conftest import ANSWERS, CAROL_EMAIL, CAROL_SECRET, OPS_SECRET, build_world


def test_create_user_validations(service, admin):
    with pytest.raises(InvalidEmail):
        service.users.create_user(admin, "not-an-address", Role.OPS, secret="x")
    service.users.create_user(admin, "dup@netops.example", Role.OPS, secret="x")
    with pytest.raises(DuplicateEmail):
        service.users.create_user(admin, "dup@netops.example", Role.OPS, secret="y")


def test_only_ops_can_create_users(service, admin, world):
    with pytest.raises(PermissionDenied):
        service.users.create_user(world.carol, "friend@acme.example", Role.CUSTOMER, secret="x")


def test_login_rejects_bad_and_unknown_credentials(service, admin):
    with pytest.raises(BadCredentials):
        service.login(CAROL_EMAIL, "wrong")  # unknown address
    service.users.create_user(admin, CAROL_EMAIL, Role.CUSTOMER, secret=CAROL_SECRET)
    with pytest.raises(BadCredentials):
        service.login(CAROL_EMAIL, "wrong")


def test_customer_sessions_start_restricted(service, admin):
    service.users.create_user(admin, CAROL_EMAIL, Role.CUSTOMER, secret=CAROL_SECRET)
    session, workspaces = service.login(CAROL_EMAIL, CAROL_SECRET)
    assert session.restricted
    assert workspaces == []  # nothing is shown until verification is on file

    with pytest.raises(AnswerEmpty):
        service.users.set_offline_verification(session, ("2019/03", "  "))
    service.users.set_offline_verification(session, ANSWERS)

    session, _ = service.login(CAROL_EMAIL, CAROL_SECRET)
    assert not session.restricted


def test_ops_sessions_are_never_restricted(admin, ops):
    assert not admin.restricted
    assert not ops.restricted
    assert admin.is_admin and not ops.is_admin


def test_verification_questions_are_fixed():
    assert OFFLINE_VERIFICATION_QUESTIONS == (
        "Year/Month when you entered the company",
        "Your home Zip code",
    )


def test_verification_answers_visible_to_ops_only(service, admin, ops, world):
    answers = service.users.verify_offline(ops, CAROL_EMAIL)
    assert answers == ANSWERS
    with pytest.raises(PermissionDenied):
        service.users.verify_offline(world.carol, CAROL_EMAIL)


def test_grants_require_a_subscription(service, admin, world):
    service.users.create_user(admin, "dan@acme.example", Role.CUSTOMER, secret="x")
    with pytest.raises(NotSubscribed):
        service.users.grant_product_access(
            admin, "dan@acme.example", world.customer.customer_id, "PRD-999", Privilege.READ_ONLY
        )
    grant = service.users.grant_product_access(
        admin,
        "dan@acme.example",
        world.customer.customer_id,
        world.product.product_id,
        Privilege.READ_ONLY,
    )
    assert grant.privilege is Privilege.READ_ONLY


def test_grants_are_for_customer_accounts(service, admin, ops, world):
    with pytest.raises(NotACustomerUser):
        service.users.grant_product_access(
            admin, ops.user_id, world.customer.customer_id, world.product.product_id,
            Privilege.READ_WRITE,
        )


def test_regrant_overwrites_privilege(service, admin, world):
    service.users.grant_product_access(
        admin, CAROL_EMAIL, world.customer.customer_id, world.product.product_id,
        Privilege.READ_ONLY,
    )
    privilege = service.users.effective_privilege(
        CAROL_EMAIL, world.customer.customer_id, world.product.product_id
    )
    assert privilege is Privilege.READ_ONLY


def test_effective_privilege_defaults_to_no_access(service, admin, world):
    service.users.create_user(admin, "dan@acme.example", Role.CUSTOMER, secret="x")
    privilege = service.users.effective_privilege(
        "dan@acme.example", world.customer.customer_id, world.product.product_id
    )
    assert privilege is Privilege.NO_ACCESS


def test_workspaces_follow_grants(service, world):
    workspaces = service.users.workspaces_for(world.carol)
    assert [(w.customer_id, w.product_id) for w in workspaces] == [
        (world.customer.customer_id, world.product.product_id)
    ]
    assert workspaces[0].privilege is Privilege.READ_WRITE


def test_idle_sessions_expire(service, clock, admin):
    service.resolve(admin.token)  # touch
    clock.advance(minutes=29)
    service.resolve(admin.token)  # touch again resets the idle window
    clock.advance(minutes=29)
    service.resolve(admin.token)
    clock.advance(minutes=31)
    with pytest.raises(AuthenticationRequired):
        service.resolve(admin.token)


def test_update_profile_self_service_and_ops_assist(service, admin, ops, world):
    service.users.update_profile(ops, name="Omar O.", phone="+1 555 0100")
    assert service.users.get_user(ops.user_id).profile.name == "Omar O."

    # ops may maintain profiles on a customer's behalf ...
    service.users.update_profile(ops, name="Carol C.", phone="", target_user_id=CAROL_EMAIL)
    assert service.users.get_user(CAROL_EMAIL).profile.name == "Carol C."

    # ... customers are self-service only
    with pytest.raises(PermissionDenied):
        service.users.update_profile(world.carol, name="Root", phone="", target_user_id=ops.user_id)

    from policydesk.errors import NameEmpty

    with pytest.raises(NameEmpty):
        service.users.update_profile(ops, name="", phone="")


def test_deactivated_accounts_cannot_log_in(service, admin, ops):
    service.users.deactivate_user(admin, ops.user_id)
    with pytest.raises(BadCredentials):
        service.login(ops.user_id, OPS_SECRET)
