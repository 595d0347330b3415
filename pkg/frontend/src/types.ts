// Wire shapes for the policydesk HTTP API.  These mirror the JSON the server
// actually sends; nothing here is invented client-side.

export type Role = "OpsAdmin" | "Ops" | "Customer";
export type Privilege = "ReadWrite" | "ReadOnly" | "NoAccess";
export type DataType = "Text" | "Numeric" | "File";

export type RequestStatus =
  | "Saved"
  | "Submitted"
  | "Cancelled"
  | "Under Review"
  | "Rejected"
  | "Pending"
  | "Approved"
  | "Completed";

export type ClassOfService = "Emergency" | "Expedited" | "Standard";

export interface UserInfo {
  user_id: string;
  email: string;
  role: Role;
  name: string;
  phone: string;
  verification_set: boolean;
  active: boolean;
}

export interface Workspace {
  customer_id: string;
  customer_name: string;
  product_id: string;
  product_name: string;
  privilege: Privilege;
}

export interface LoginResponse {
  token: string;
  user: UserInfo;
  restricted: boolean;
  workspaces: Workspace[];
  verification_questions?: string[];
}

export interface SessionInfo {
  user: UserInfo;
  restricted: boolean;
  workspaces: Workspace[];
  verification_questions?: string[];
}

// -- queue -------------------------------------------------------------------

export interface QueueColumn {
  key: string;
  label: string;
}

export interface QueueRow {
  request_id: number;
  class_of_service: string;
  request_time: string;
  customer: string;
  product: string;
  status: string;
  assigned_to: string;
}

export interface QueuePage {
  columns: QueueColumn[];
  rows: QueueRow[];
  page: number;
  page_size: number;
  total_rows: number;
  total_pages: number;
}

// -- requests ----------------------------------------------------------------

export interface WorkItem {
  work_item_id: string;
  target_kind: string;
  target_id: string;
  object_id: string;
  proposed_values: Record<string, string>;
  item_status: RequestStatus;
}

export interface ChangeRequest {
  request_id: number;
  class_of_service: ClassOfService;
  request_time: string;
  customer_id: string;
  product_id: string;
  package_id: string;
  kind: string;
  status: RequestStatus;
  created_by: string;
  assigned_to: string;
  last_assignee: string;
  suspended: boolean;
  start_date: string;
  end_date: string;
  work_items: WorkItem[];
}

export interface EditSpec {
  target_kind: "customer_policy" | "pep";
  target_id: string;
  values: Record<string, string>;
}

export interface SubmitRequestBody {
  package_id: string;
  class_of_service: ClassOfService;
  edits: EditSpec[];
  draft?: boolean;
}

// Detail view objects are a slimmer cut than GET /objects/{id}: no schema.
export interface ObjectSnapshot {
  object_id: string;
  schema_id: string;
  blank: boolean;
  values: Record<string, string>;
}

export interface RequestDetail {
  request: ChangeRequest;
  requested_at: string;
  pep_ids: string[];
  policies: {
    customer_policy_id: string;
    policy_id: string;
    policy_name: string;
    object: ObjectSnapshot;
  }[];
  work_items: WorkItem[];
}

// -- schemas and objects -----------------------------------------------------

export interface SchemaColumn {
  name: string;
  data_type: DataType;
  required: boolean;
  parent_name: string | null;
}

export interface SchemaItem {
  name: string;
  data_type: DataType;
  required: boolean;
  parent_name: string | null;
  // False when some ancestor is currently disabled on the template; the
  // server refuses edits to such columns, so the form must grey them out.
  ancestors_enabled: boolean;
}

export interface SchemaPayload {
  schema_id: string;
  template_id: string;
  version: number;
  columns: SchemaColumn[];
  items: Record<string, SchemaItem>;
}

export interface ObjectPayload {
  object_id: string;
  schema_id: string;
  customer_id: string;
  blank: boolean;
  values: Record<string, string>;
  schema: SchemaPayload;
}

// -- customers and packages --------------------------------------------------

export interface CustomerRecord {
  customer_id: string;
  name: string;
  contact_user_id: string;
}

export interface SubscriptionRecord {
  subscription_id: string;
  customer_id: string;
  product_id: string;
  customer_policy_ids: string[];
  package_ids: string[];
  pep_ids: string[];
}

export interface PepRecord {
  pep_id: string;
  customer_id: string;
  subscription_id: string;
  product_id: string;
  package_id: string;
  object_id: string;
  object?: ObjectPayload;
}

export interface CustomerView {
  customer: CustomerRecord;
  subscriptions: SubscriptionRecord[];
  peps: PepRecord[];
}

export interface PackagePolicy {
  customer_policy_id: string;
  policy_id: string;
  policy_name: string;
  object: ObjectPayload;
}

export interface PackageView {
  package: {
    package_id: string;
    customer_id: string;
    subscription_id: string;
    product_id: string;
    member_object_ids: string[];
  };
  policies: PackagePolicy[];
  peps: PepRecord[];
}

export interface FileUploadResult {
  token: string;
  size: number;
}

// Error envelope: {"error": {"code": ..., "message": ..., "details": {...}}}
export interface ErrorPayload {
  code: string;
  message: string;
  details: Record<string, unknown>;
}
