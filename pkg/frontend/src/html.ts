export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

// String(x) is the shortest round-trip decimal, so Number(num(x)) === x and
// what the page shows is exactly what the API sent.
export function num(x: number): string {
  return String(x);
}
