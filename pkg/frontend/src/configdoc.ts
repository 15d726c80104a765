/** Display-only reader for the restricted two-level YAML the engine accepts.
 *
 * The backend is the validator; this reader only lifts the fields the
 * details panel shows (role/goal/backstory/tools for agents, description/
 * expected_output/agent/context for tasks) out of well-formed documents.
 * Anything it cannot read it simply omits — the raw text is always
 * available in the config editor.
 */

export type ConfigEntry = Record<string, string | string[]>;

export function parseConfigDoc(text: string): Record<string, ConfigEntry> {
  const entries: Record<string, ConfigEntry> = {};
  let currentEntry: ConfigEntry | null = null;
  let currentList: string[] | null = null;

  for (const rawLine of text.split("\n")) {
    const line = rawLine.replace(/\r$/, "");
    if (!line.trim() || line.trim().startsWith("#")) continue;

    const topLevel = /^(\w[\w-]*):\s*$/.exec(line);
    if (topLevel) {
      currentEntry = {};
      currentList = null;
      entries[topLevel[1]!] = currentEntry;
      continue;
    }
    if (!currentEntry) continue;

    const field = /^ {2}(\w[\w-]*):\s*(.*)$/.exec(line);
    if (field) {
      const [, key, value] = field;
      if (value) {
        currentEntry[key!] = unquote(value);
        currentList = null;
      } else {
        currentList = [];
        currentEntry[key!] = currentList;
      }
      continue;
    }

    const item = /^ {4}-\s*(.*)$/.exec(line);
    if (item && currentList) {
      currentList.push(unquote(item[1]!));
    }
  }
  return entries;
}

function unquote(value: string): string {
  const trimmed = value.trim();
  if (
    trimmed.length >= 2 &&
    ((trimmed.startsWith('"') && trimmed.endsWith('"')) ||
      (trimmed.startsWith("'") && trimmed.endsWith("'")))
  ) {
    return trimmed.slice(1, -1);
  }
  return trimmed;
}
