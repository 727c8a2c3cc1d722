"""Command-line surface: argument parsing, output rendering and exit codes."""
