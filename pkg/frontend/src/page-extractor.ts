/**
 * Page-side element extractor.
 *
 * Walks the DOM in preorder from the root element and emits, per element:
 * preorder index, parent index, tag, href/type attributes, the rendered
 * bounding box, and the computed values of every requested style property.
 * The property list is supplied by the host at injection time, so the
 * feature schema lives in exactly one place (the host).
 *
 * Strictly read-only: nothing in here may mutate the DOM. Elements whose
 * style cannot be read are emitted with an error marker; the host skips them.
 * Top document only; frames are out of scope for now.
 */

interface ExtractionBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

interface ElementAttrs {
  href?: string;
  type?: string;
}

interface ElementRecord {
  index: number;
  parent: number | null;
  tag: string;
  attrs: ElementAttrs;
  box: ExtractionBox;
  styles: Record<string, string>;
}

interface ErrorRecord {
  index: number;
  parent: number | null;
  tag: string;
  error: string;
}

interface ExtractionPayload {
  schema_version: number;
  elements: Array<ElementRecord | ErrorRecord>;
}

function __pageExtract(requiredProperties: string[]): ExtractionPayload {
  const elements: Array<ElementRecord | ErrorRecord> = [];

  function readElement(el: Element, index: number, parent: number | null): ElementRecord {
    const rect = el.getBoundingClientRect();
    const computed = window.getComputedStyle(el);
    const styles: Record<string, string> = {};
    for (const prop of requiredProperties) {
      styles[prop] = computed.getPropertyValue(prop);
    }
    const attrs: ElementAttrs = {};
    const href = el.getAttribute("href");
    if (href !== null) {
      attrs.href = href;
    }
    const type = el.getAttribute("type");
    if (type !== null) {
      attrs.type = type;
    }
    return {
      index,
      parent,
      tag: el.tagName.toLowerCase(),
      attrs,
      // negative coordinates (off-viewport elements) are preserved as-is
      box: { x: rect.x, y: rect.y, w: rect.width, h: rect.height },
      styles,
    };
  }

  function walk(el: Element, parent: number | null): void {
    const index = elements.length;
    try {
      elements.push(readElement(el, index, parent));
    } catch (err) {
      elements.push({
        index,
        parent,
        tag: el.tagName ? el.tagName.toLowerCase() : "",
        error: String(err),
      });
    }
    for (let i = 0; i < el.children.length; i++) {
      walk(el.children[i], index);
    }
  }

  walk(document.documentElement, null);
  return { schema_version: 1, elements };
}

// Installed as a global so the host can call it after injecting this script.
(globalThis as Record<string, unknown>).__pageExtract = __pageExtract;
