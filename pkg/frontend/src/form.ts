import { el } from "./dom.js";
import type { ObjectPayload, SchemaColumn } from "./types.js";

// Change-request form for one policy object.  The schema's column order and
// parent links drive the layout; the current template's enablement drives
// which inputs are live.  Only touched columns become part of the submitted
// edit — an untouched field must not show up as a proposed value, and a field
// cleared to "" must (the server treats empty as an explicit clear).

export interface FormField {
  column: SchemaColumn;
  depth: number;
  editable: boolean;
  value: string;
}

export function buildFields(object: ObjectPayload): FormField[] {
  const byName = new Map(object.schema.columns.map((c) => [c.name, c]));
  const fields: FormField[] = [];
  for (const column of object.schema.columns) {
    let depth = 0;
    let parent = column.parent_name;
    while (parent) {
      depth += 1;
      parent = byName.get(parent)?.parent_name ?? null;
    }
    const item = object.schema.items[column.name];
    fields.push({
      column,
      depth,
      // Disabling an item blocks writes to what sits under it, not to the
      // item itself, so only the ancestor chain matters here.
      editable: item ? item.ancestors_enabled : true,
      value: object.values[column.name] ?? "",
    });
  }
  return fields;
}

/** Tracks which columns the user actually changed relative to the object's
 * stored values.  Re-typing the original value un-dirties the column. */
export class EditBuffer {
  private readonly original: Record<string, string>;
  private readonly touched = new Map<string, string>();

  constructor(object: ObjectPayload) {
    this.original = { ...object.values };
  }

  set(column: string, value: string): void {
    if ((this.original[column] ?? "") === value) {
      this.touched.delete(column);
    } else {
      this.touched.set(column, value);
    }
  }

  get dirty(): boolean {
    return this.touched.size > 0;
  }

  values(): Record<string, string> {
    return Object.fromEntries(this.touched);
  }
}

export interface ObjectFormOptions {
  readOnly: boolean;
  uploadFile?: (file: File) => Promise<string>;
  onError?: (err: unknown) => void;
}

export function renderObjectForm(
  title: string,
  object: ObjectPayload,
  buffer: EditBuffer,
  opts: ObjectFormOptions,
): HTMLElement {
  const panel = el("section", { class: "object-form" });
  const heading = el("h3", {}, title);
  heading.append(el("span", { class: "object-id" }, " " + object.object_id));
  if (object.blank) {
    heading.append(el("span", { class: "badge badge-blank" }, "blank"));
  }
  panel.append(heading);

  for (const field of buildFields(object)) {
    const name = field.column.name;
    const row = el("div", { class: "form-row" });
    row.style.paddingLeft = `${field.depth * 22}px`;

    const label = el("label", { class: "form-label" }, name);
    if (field.column.required) label.append(el("span", { class: "required" }, " *"));
    label.append(el("span", { class: "type-tag" }, field.column.data_type));
    row.append(label);

    const disabled = opts.readOnly || !field.editable;
    const input = el("input", {
      class: "form-input",
      type: "text",
      name,
      value: field.value,
      disabled,
    });
    if (field.column.data_type === "Numeric") {
      input.setAttribute("inputmode", "decimal");
    }
    input.addEventListener("input", () => buffer.set(name, input.value));
    row.append(input);

    if (field.column.data_type === "File" && !disabled && opts.uploadFile) {
      const picker = el("input", { class: "file-picker", type: "file" });
      picker.addEventListener("change", async () => {
        const file = picker.files?.[0];
        if (!file) return;
        try {
          const token = await opts.uploadFile!(file);
          input.value = token;
          buffer.set(name, token);
        } catch (err) {
          opts.onError?.(err);
        }
      });
      row.append(picker);
    }
    if (!field.editable) {
      row.append(el("span", { class: "disabled-note" }, "disabled upstream"));
    }
    panel.append(row);
  }
  return panel;
}
