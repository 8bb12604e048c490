# Contact mechanics app package
