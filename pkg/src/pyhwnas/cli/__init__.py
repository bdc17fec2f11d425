from .cli_parser import cli_parser, main
